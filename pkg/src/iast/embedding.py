"""Per-vertex input features for the corner estimation network.

Each boundary vertex gets a 108-d row: a sinusoidal embedding of its
geometric attributes (36), centroid-relative visual feature deltas (36),
and a learned order embedding (36), concatenated in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .geometry import BoundaryPolygon, GeometricAttributes, geometric_attributes
from .tensor import ShapeError, Tensor

EMBED_DIM = 36
WAVELENGTH_BASE = 1000.0
DETECTION_CHANNELS = 32
PRIOR_CHANNELS = 4
VISUAL_CHANNELS = DETECTION_CHANNELS + PRIOR_CHANNELS


@dataclass
class FeatureMap:
    """A channels x H x W raster with a role tag."""

    data: np.ndarray
    role: str  # "detection_shared" | "prior" | "recognition_shared"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ShapeError(f"feature map must be (c, h, w), got {self.data.shape}")
        if self.data.shape[1] < 8 or self.data.shape[2] < 8:
            raise ShapeError(f"feature map raster too small: {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("feature map contains non-finite values")


def embed_geometric(attrs: GeometricAttributes, dim: int = EMBED_DIM) -> np.ndarray:
    """Sinusoidal embedding of the per-vertex attribute rows.

    Each of the 4 attribute scalars maps to dim/4 slots: slot 2j holds
    cos(2*pi*a / 1000^(2j/width)), slot 2j+1 the matching sine; an odd
    per-attribute width ends on a trailing cosine slot.
    """
    if dim % 4 != 0:
        raise ShapeError(f"embedding dim must be divisible by 4, got {dim}")
    width = dim // 4
    slots = np.arange(width)
    pair = slots // 2
    freq = 2.0 * np.pi / np.power(WAVELENGTH_BASE, 2.0 * pair / width)
    phase = attrs.rows[:, :, None] * freq[None, None, :]  # (n, 4, width)
    emb = np.where(slots % 2 == 0, np.cos(phase), np.sin(phase))
    return emb.reshape(len(attrs.rows), dim)


def sample_visual(f_d: FeatureMap, f_p: FeatureMap, poly: BoundaryPolygon) -> Tensor:
    """Centroid-relative bilinear samples of the 36-channel visual stack.

    Returns a (2K, 36) tensor of F(vertex) - F(centroid) rows, differentiable
    with respect to the underlying rasters.
    """
    if f_d.data.shape[0] != DETECTION_CHANNELS:
        raise ShapeError(f"detection features must have {DETECTION_CHANNELS} channels, "
                         f"got {f_d.data.shape[0]}")
    if f_p.data.shape[0] != PRIOR_CHANNELS:
        raise ShapeError(f"prior features must have {PRIOR_CHANNELS} channels, "
                         f"got {f_p.data.shape[0]}")
    stack = T.concat([Tensor(f_d.data), Tensor(f_p.data)], axis=0)
    centroid = poly.points.mean(axis=0)
    coords = Tensor(np.vstack([poly.points, centroid]))
    samples = T.bilinear_sample(stack, coords)  # (2K + 1, 36)
    n = len(poly)
    delta = np.hstack([np.eye(n), -np.ones((n, 1))])  # row_i - centroid row
    return T.matmul(Tensor(delta), samples)


def init_order_embedding(rng: np.random.Generator, length: int,
                         dim: int = EMBED_DIM) -> Tensor:
    """Trainable lookup table, one row per boundary position, N(0, 0.02^2)."""
    return Tensor(rng.normal(0.0, 0.02, (length, dim)), requires_grad=True)


def order_embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Rows of the learned position table; gradients reach only looked-up rows."""
    return T.gather_rows(table, indices)


def assemble_features(ge: np.ndarray | Tensor, fb: Tensor, fe: Tensor) -> Tensor:
    """Row-wise concatenation [geometric-embedding | visual-delta | order]."""
    ge_t = ge if isinstance(ge, Tensor) else Tensor(ge)
    if not (ge_t.shape[0] == fb.shape[0] == fe.shape[0]):
        raise ShapeError(f"row mismatch: ge {ge_t.shape}, fb {fb.shape}, fe {fe.shape}")
    return T.concat([ge_t, fb, fe], axis=1)


def vertex_features(f_d: FeatureMap, f_p: FeatureMap, poly: BoundaryPolygon,
                    table: Tensor) -> Tensor:
    """Full (2K, 108) input feature assembly for one boundary."""
    attrs = geometric_attributes(poly)
    ge = embed_geometric(attrs)
    fb = sample_visual(f_d, f_p, poly)
    fe = order_embedding(table, np.arange(len(poly)))
    return assemble_features(ge, fb, fe)
