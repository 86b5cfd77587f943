"""Thin-plate-spline sampling grids with a learned dynamic offset head.

A TPS maps the canonical unit rectangle (control anchors on its top and
bottom edges) onto the refined control points, producing a base fiducial
grid. A small convolutional head over features sampled at the base grid
predicts tanh-bounded offsets, scaled by the instance bounding box and a
fixed coefficient of 0.1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .embedding import FeatureMap
from .geometry import ControlPointSet
from .tensor import ShapeError, Tensor

BETA = 0.1
LAMBDA_TPS = 1e-6
DEFAULT_GRID_W = 64
DEFAULT_GRID_H = 16
OFFSET_CHANNELS = 32
COND_LIMIT = 1e12


class TpsError(ValueError):
    pass


def tps_kernel(r2: np.ndarray) -> np.ndarray:
    """U(r) = r^2 log(r^2) expressed on squared distances, with U(0) = 0."""
    out = np.zeros_like(r2)
    mask = r2 > 0
    out[mask] = r2[mask] * np.log(r2[mask])
    return out


def canonical_anchors(k: int) -> np.ndarray:
    """K/2 equispaced points on the top edge of [0,1]^2, K/2 on the bottom."""
    if k < 6 or k % 2 != 0:
        raise TpsError(f"need an even number of anchors >= 6, got {k}")
    u = np.linspace(0.0, 1.0, k // 2)
    top = np.stack([u, np.zeros_like(u)], axis=1)
    bottom = np.stack([u, np.ones_like(u)], axis=1)
    return np.vstack([top, bottom])


def _design(query: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """[kernel | 1 | x | y] rows for evaluating a TPS at query points."""
    d2 = ((query[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
    return np.hstack([tps_kernel(d2), np.ones((len(query), 1)), query])


@dataclass
class TpsTransform:
    anchors: np.ndarray          # (K, 2) canonical source points
    weights: np.ndarray          # (K+3, 2) kernel + affine coefficients
    lambda_tps: float
    solve_matrix: np.ndarray     # inverse system, cached for grid assembly

    @property
    def k(self) -> int:
        return len(self.anchors)

    def evaluate(self, query: np.ndarray) -> np.ndarray:
        """Map canonical (u, v) points into image space."""
        return _design(np.asarray(query, dtype=np.float64), self.anchors) @ self.weights


def tps_solve(controls: ControlPointSet | np.ndarray,
              lambda_tps: float = LAMBDA_TPS) -> TpsTransform:
    """Solve the (K+3) x (K+3) interpolation system anchor -> control point."""
    pts = controls.points if isinstance(controls, ControlPointSet) else np.asarray(controls)
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 6 or len(pts) % 2 != 0:
        raise TpsError(f"controls must be (K, 2) with K even and >= 6, got {pts.shape}")
    if lambda_tps < 0:
        raise TpsError(f"lambda_tps must be >= 0, got {lambda_tps}")
    anchors = canonical_anchors(len(pts))
    k = len(anchors)
    d2 = ((anchors[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
    kern = tps_kernel(d2) + lambda_tps * np.eye(k)
    p = np.hstack([np.ones((k, 1)), anchors])
    system = np.zeros((k + 3, k + 3))
    system[:k, :k] = kern
    system[:k, k:] = p
    system[k:, :k] = p.T
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise TpsError(f"degenerate control points: system condition {cond:.3e}; "
                       f"retry with a larger lambda_tps")
    inv = np.linalg.inv(system)
    rhs = np.vstack([pts, np.zeros((3, 2))])
    return TpsTransform(anchors=anchors, weights=inv @ rhs,
                        lambda_tps=lambda_tps, solve_matrix=inv)


def canonical_lattice(w_o: int, h_o: int) -> np.ndarray:
    """Regular (h_o * w_o, 2) lattice over [0,1]^2, row-major, row 0 on top."""
    u = np.linspace(0.0, 1.0, w_o)
    v = np.linspace(0.0, 1.0, h_o)
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu.reshape(-1), vv.reshape(-1)], axis=1)


def grid_matrix(t: TpsTransform, w_o: int, h_o: int) -> np.ndarray:
    """Linear map S with grid = S @ controls; keeps the grid differentiable
    with respect to the control points."""
    e = _design(canonical_lattice(w_o, h_o), t.anchors)
    return (e @ t.solve_matrix)[:, : t.k]


@dataclass
class SamplingGrid:
    """Base and offset sampling lattices for one text instance.

    ``base`` and ``warped`` are (h_o * w_o, 2) coordinate tensors in
    row-major order (row 0 = top side of the control points).
    """

    w_o: int
    h_o: int
    base: Tensor
    bbox_w: float
    bbox_h: float
    beta: float = BETA
    offsets: Tensor | None = None  # normalized tanh outputs, (2, h_o, w_o)
    warped: Tensor | None = None

    def sample_points(self) -> Tensor:
        return self.warped if self.warped is not None else self.base


def tps_grid(t: TpsTransform, controls: ControlPointSet | Tensor,
             w_o: int = DEFAULT_GRID_W, h_o: int = DEFAULT_GRID_H) -> SamplingGrid:
    """Evaluate the transform on a regular lattice; offsets start at zero.

    ``controls`` may be a Tensor (K, 2) to keep gradients flowing from the
    grid back into the refined boundary.
    """
    if w_o < 2 or h_o < 2:
        raise ShapeError(f"grid dims must be >= 2, got {w_o}x{h_o}")
    ct = controls if isinstance(controls, Tensor) else Tensor(controls.points)
    base = T.matmul(Tensor(grid_matrix(t, w_o, h_o)), ct)
    pts = ct.data
    return SamplingGrid(w_o=w_o, h_o=h_o, base=base,
                        bbox_w=float(np.ptp(pts[:, 0])), bbox_h=float(np.ptp(pts[:, 1])))


@dataclass
class DsmParams:
    conv1: tuple[Tensor, Tensor]  # 3x3, dilation 3
    conv2: tuple[Tensor, Tensor]  # 3x3, dilation 1
    head: tuple[Tensor, Tensor]   # 1x1 to 2 offset channels

    def named(self, prefix: str = "dsm.") -> dict[str, Tensor]:
        return {
            f"{prefix}conv1.w": self.conv1[0], f"{prefix}conv1.b": self.conv1[1],
            f"{prefix}conv2.w": self.conv2[0], f"{prefix}conv2.b": self.conv2[1],
            f"{prefix}head.w": self.head[0], f"{prefix}head.b": self.head[1],
        }


def init_dsm_params(rng: np.random.Generator, in_channels: int = 32,
                    channels: int = OFFSET_CHANNELS) -> DsmParams:
    def conv(cin, cout):
        w = Tensor(rng.normal(0.0, np.sqrt(2.0 / (cin * 9)), (cout, cin, 3, 3)),
                   requires_grad=True)
        return w, Tensor(np.zeros(cout), requires_grad=True)

    # zero head: offsets start at zero, so the warped grid equals the base grid
    head = (Tensor(np.zeros((2, channels, 1, 1)), requires_grad=True),
            Tensor(np.zeros(2), requires_grad=True))
    return DsmParams(conv1=conv(in_channels, channels),
                     conv2=conv(channels, channels), head=head)


def dynamic_offsets(f_r: FeatureMap, grid: SamplingGrid, params: DsmParams,
                    beta: float = BETA) -> SamplingGrid:
    """Predict tanh-bounded grid offsets from recognition-shared features."""
    if f_r.data.shape[0] != params.conv1[0].shape[1]:
        raise ShapeError(f"dynamic_offsets: feature channels {f_r.data.shape[0]} do not "
                         f"match head input {params.conv1[0].shape[1]}")
    h_o, w_o = grid.h_o, grid.w_o
    sampled = T.bilinear_sample(Tensor(f_r.data), grid.base)  # (M, C)
    f = T.reshape(T.transpose(sampled), (sampled.shape[1], h_o, w_o))
    f = T.relu(T.conv2d(f, *params.conv1, dilation=3))
    f = T.relu(T.conv2d(f, *params.conv2, dilation=1))
    norm_off = T.tanh(T.conv2d(f, *params.head, dilation=1))  # (2, h_o, w_o)
    scale_map = np.empty((2, h_o, w_o))
    scale_map[0] = grid.bbox_w
    scale_map[1] = grid.bbox_h
    scaled = T.mul(norm_off, Tensor(scale_map))
    flat = T.transpose(T.reshape(scaled, (2, h_o * w_o)))  # (M, 2)
    warped = T.add(grid.base, T.scale(flat, beta))
    return SamplingGrid(w_o=w_o, h_o=h_o, base=grid.base, bbox_w=grid.bbox_w,
                        bbox_h=grid.bbox_h, beta=beta, offsets=norm_off, warped=warped)


def grid_sample(f_r: FeatureMap, grid: SamplingGrid) -> Tensor:
    """Bilinear-sample every channel at the grid points -> (C, h_o, w_o)."""
    pts = grid.sample_points()
    sampled = T.bilinear_sample(Tensor(f_r.data), pts)  # (M, C)
    return T.reshape(T.transpose(sampled), (f_r.data.shape[0], grid.h_o, grid.w_o))
