"""Iterative boundary refinement with shared parameters.

Each iteration samples 36-channel visual features at the current control
points, runs two circular convolutions over the closed K-point sequence,
and emits a 2-d offset per point. The head is zero-initialized so iteration
0 starts at the identity; training supervises every iteration's absolute
positions with Smooth-L1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .embedding import FeatureMap, VISUAL_CHANNELS
from .tensor import ShapeError, Tensor

REFINE_CHANNELS = 64
TRAIN_ITERATIONS = 5
EVAL_ITERATIONS = 3


@dataclass
class BrmParams:
    convs: list[tuple[Tensor, Tensor]]
    head: tuple[Tensor, Tensor]

    def named(self, prefix: str = "brm.") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, (w, b) in enumerate(self.convs):
            out[f"{prefix}conv{i}.w"] = w
            out[f"{prefix}conv{i}.b"] = b
        out[f"{prefix}head.w"], out[f"{prefix}head.b"] = self.head
        return out


def init_brm_params(rng: np.random.Generator,
                    channels: int = REFINE_CHANNELS) -> BrmParams:
    in_ch = VISUAL_CHANNELS + 2  # sampled features plus normalized coordinates
    convs = []
    width = in_ch
    for _ in range(2):
        w = Tensor(rng.normal(0.0, np.sqrt(2.0 / (width * 3)), (channels, width, 3)),
                   requires_grad=True)
        convs.append((w, Tensor(np.zeros(channels), requires_grad=True)))
        width = channels
    # zero head: refinement starts from the identity mapping
    head = (Tensor(np.zeros((2, channels)), requires_grad=True),
            Tensor(np.zeros(2), requires_grad=True))
    return BrmParams(convs=convs, head=head)


def brm_refine(points: Tensor, feat: FeatureMap, params: BrmParams) -> Tensor:
    """One refinement step: (K, 2) points in, (K, 2) refined points out."""
    if points.ndim != 2 or points.shape[1] != 2:
        raise ShapeError(f"brm_refine: points must be (K, 2), got {points.shape}")
    if feat.data.shape[0] != VISUAL_CHANNELS:
        raise ShapeError(f"brm_refine: expected {VISUAL_CHANNELS}-channel features, "
                         f"got {feat.data.shape[0]}")
    _, h, w = feat.data.shape
    sampled = T.bilinear_sample(Tensor(feat.data), points)  # (K, 36)
    norm = T.matmul(points, Tensor(np.diag([1.0 / w, 1.0 / h])))
    x = T.transpose(T.concat([sampled, norm], axis=1))  # (38, K)
    for cw, cb in params.convs:
        x = T.relu(T.conv1d_circular(x, cw, cb, dilation=1))
    hw, hb = params.head
    offsets = T.transpose(T.dense(T.transpose(x), T.transpose(hw), hb))  # (2, K)
    return T.add(points, T.transpose(offsets))


def refine_iterations(points0: Tensor, feat: FeatureMap, params: BrmParams,
                      iterations: int) -> list[Tensor]:
    """Run shared-parameter refinement; returns the point set per iteration."""
    history: list[Tensor] = []
    pts = points0
    for _ in range(iterations):
        pts = brm_refine(pts, feat, params)
        history.append(pts)
    return history


def brm_loss(history: list[Tensor], target: np.ndarray) -> Tensor:
    """Mean Smooth-L1 between every iteration's points and the aligned target."""
    target = np.asarray(target, dtype=np.float64)
    if not history:
        raise ShapeError("brm_loss: empty refinement history")
    k = history[0].shape[0]
    if target.shape != (k, 2):
        raise ShapeError(f"brm_loss: target {target.shape} does not match K={k}")
    tgt = Tensor(target)
    total = T.smooth_l1(history[0], tgt)
    for pts in history[1:]:
        if pts.shape != (k, 2):
            raise ShapeError(f"brm_loss: misaligned point set {pts.shape}")
        total = T.add(total, T.smooth_l1(pts, tgt))
    return T.scale(total, 1.0 / (k * len(history)))
