"""Per-sample forward paths shared by training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import brm, dsm, recognizer, rem, synth
from .embedding import FeatureMap, vertex_features
from .geometry import BoundaryPolygon, ControlPointSet, split_and_resample
from .model import Model
from .synth import SyntheticSample
from .tensor import Tensor


@dataclass
class SampleInputs:
    """One sample plus its deterministic feature rasters and oracle boundary."""

    sample: SyntheticSample
    f_d: FeatureMap
    f_p: FeatureMap
    f_r: FeatureMap
    feat36: FeatureMap          # detection + prior stack used by refinement
    boundary: BoundaryPolygon   # perturbed oracle boundary fed to the model
    corner_labels: np.ndarray   # (4, 2K) one-hot on the perturbed boundary
    corner_indices: tuple[int, int, int, int]


def prepare_inputs(sample: SyntheticSample, noise: float, seed) -> SampleInputs:
    f_d = synth.detection_features(sample.image)
    f_p = synth.prior_features(sample.image.shape, sample.gt_boundary)
    f_r = synth.recognition_features(sample.image)
    feat36 = FeatureMap(np.concatenate([f_d.data, f_p.data]), "detection_shared")
    boundary, shift = synth.perturb_boundary(sample.gt_boundary, noise, seed)
    n = len(boundary)
    idx = tuple(int((c - shift) % n) for c in sample.corner_indices)
    labels = np.zeros((4, n))
    for cls, i in enumerate(idx):
        labels[cls, i] = 1.0
    return SampleInputs(sample=sample, f_d=f_d, f_p=f_p, f_r=f_r, feat36=feat36,
                        boundary=boundary, corner_labels=labels, corner_indices=idx)


@dataclass
class ForwardResult:
    loss_re: Tensor
    loss_br: Tensor
    loss_rec: Tensor
    prediction: rem.CornerPrediction
    corners_used: tuple[int, int, int, int]
    history: list[Tensor]
    probs: Tensor


def forward_train(model: Model, inputs: SampleInputs, teacher_forcing: bool,
                  brm_iters: int = brm.TRAIN_ITERATIONS,
                  alpha: float = 0.1) -> ForwardResult:
    """Full differentiable path for one sample during training."""
    fc = vertex_features(inputs.f_d, inputs.f_p, inputs.boundary, model.order_table)
    pred = rem.rem_forward(fc, model.rem)
    loss_re = rem.reading_order_loss(pred, inputs.corner_labels, alpha=alpha)

    if teacher_forcing:
        corners = inputs.corner_indices
    else:
        corners, _ = rem.decode_corners(pred)
    controls0 = split_and_resample(inputs.boundary, corners, model.config.k)
    history = brm.refine_iterations(Tensor(controls0.points), inputs.feat36,
                                    model.brm, brm_iters)
    loss_br = brm.brm_loss(history, inputs.sample.gt_controls.points)

    # The sampling path sees the refined points as constants: recognition
    # gradients are 20x the boundary weight and would otherwise drag the
    # refiner away from its own supervision.
    refined = Tensor(history[-1].data)
    transform = dsm.tps_solve(ControlPointSet(refined.data))
    grid = dsm.tps_grid(transform, refined, model.config.grid_w, model.config.grid_h)
    grid = dsm.dynamic_offsets(inputs.f_r, grid, model.dsm)
    sampled = dsm.grid_sample(inputs.f_r, grid)
    probs = recognizer.recognize(sampled, model.rec)
    loss_rec = recognizer.recognition_loss(probs, inputs.sample.col_labels)
    return ForwardResult(loss_re=loss_re, loss_br=loss_br, loss_rec=loss_rec,
                         prediction=pred, corners_used=corners, history=history,
                         probs=probs)


@dataclass
class InferenceResult:
    corners: tuple[int, int, int, int]
    low_confidence: bool
    boundary_history: list[np.ndarray]  # refined control points per iteration
    decoded: str
    probs: np.ndarray
    corner_labels: np.ndarray
    corner_indices: tuple[int, int, int, int]


def upright_prior_corners(boundary: BoundaryPolygon) -> tuple[int, int, int, int]:
    """Corner guess assuming default top-up, left-to-right reading.

    The instance's two end caps are single polygon edges spanning the full
    ribbon width, roughly twice as long as the per-vertex spacing along the
    text sides, so the two longest edges locate all four corners at once.
    The upright assumption (reading direction pointing right) then picks
    between the two 180-degree-flipped corner assignments. Inverted
    instances therefore decode mirrored, which is exactly what this
    fallback cannot know without learned reading-order evidence.
    """
    pts = boundary.points
    n = len(pts)
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    order = np.argsort(seg)[::-1]
    a = int(order[0])
    b = next((int(i) for i in order[1:]
              if i != (a + 1) % n and i != (a - 1) % n), None)
    if b is None:
        return (0, n // 4, n // 2, 3 * n // 4)
    # edge a-(a+1) and edge b-(b+1) are the end caps; walking the contour,
    # the vertex after a cap starts one long side and the vertex before
    # the other cap ends it
    options = [
        ((a + 1) % n, b, (b + 1) % n, a),
        ((b + 1) % n, a, (a + 1) % n, b),
    ]
    chords = [pts[c1] - pts[c0] for c0, c1, _, _ in options]
    for cc, chord in zip(options, chords):
        if chord[0] > 0:
            return cc
    # reading direction is (near) vertical both ways: prefer reading upward
    return options[0] if chords[0][1] <= chords[1][1] else options[1]


def forward_eval(model: Model, inputs: SampleInputs, use_rem: bool = True,
                 use_dsm: bool = True,
                 iterations: int = brm.EVAL_ITERATIONS) -> InferenceResult:
    """Inference path: decoded corners (no teacher forcing), refinement,
    sampling, and greedy decoding."""
    fc = vertex_features(inputs.f_d, inputs.f_p, inputs.boundary, model.order_table)
    pred = rem.rem_forward(fc, model.rem)
    if use_rem:
        corners, low_conf = rem.decode_corners(pred)
    else:
        corners, low_conf = upright_prior_corners(inputs.boundary), False

    controls0 = split_and_resample(inputs.boundary, corners, model.config.k)
    history = brm.refine_iterations(Tensor(controls0.points), inputs.feat36,
                                    model.brm, iterations)
    point_history = [controls0.points] + [h.data for h in history]
    refined = point_history[-1]

    transform = dsm.tps_solve(ControlPointSet(refined))
    grid = dsm.tps_grid(transform, ControlPointSet(refined),
                        model.config.grid_w, model.config.grid_h)
    if use_dsm:
        grid = dsm.dynamic_offsets(inputs.f_r, grid, model.dsm)
    sampled = dsm.grid_sample(inputs.f_r, grid)
    probs = recognizer.recognize(sampled, model.rec)
    return InferenceResult(corners=corners, low_confidence=low_conf,
                           boundary_history=point_history,
                           decoded=recognizer.greedy_decode(probs),
                           probs=probs.data,
                           corner_labels=inputs.corner_labels,
                           corner_indices=inputs.corner_indices)
