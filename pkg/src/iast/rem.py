"""Corner estimation on closed boundaries: a circular-convolution network
over per-vertex features, its joint loss, and the corner decoding rule.

The network emits a 4 x 2K score matrix (one sigmoid score per corner class
per vertex). The loss combines per-point log loss on the raw scores with two
KL-divergence regularizers computed on row-normalized distributions: an
orthogonality term on the 4x4 class-similarity matrix and a distribution
term tying the class-summed prediction to the class-summed labels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

NUM_CLASSES = 4
DILATIONS = (1, 1, 2, 4)
CONV_CHANNELS = 64
FUSION_CHANNELS = 64
HEAD_CHANNELS = (128, 64)
IDENTITY_SMOOTHING = 1e-3
LOW_CONFIDENCE_LOGPROB = 4.0 * np.log(0.1)
EXHAUSTIVE_MAX_LENGTH = 64


@dataclass
class RemParams:
    """Weights of the circular-conv block, fusion layer, and prediction head."""

    convs: list[tuple[Tensor, Tensor]]
    fusion: tuple[Tensor, Tensor]
    head: list[tuple[Tensor, Tensor]]
    dilations: tuple[int, ...] = DILATIONS

    def named(self, prefix: str = "rem.") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, (w, b) in enumerate(self.convs):
            out[f"{prefix}conv{i}.w"] = w
            out[f"{prefix}conv{i}.b"] = b
        out[f"{prefix}fusion.w"], out[f"{prefix}fusion.b"] = self.fusion
        for i, (w, b) in enumerate(self.head):
            out[f"{prefix}head{i}.w"] = w
            out[f"{prefix}head{i}.b"] = b
        return out


def _he(rng, shape, fan_in):
    return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), shape), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def init_rem_params(rng: np.random.Generator, in_channels: int = 108,
                    conv_channels: int = CONV_CHANNELS,
                    fusion_channels: int = FUSION_CHANNELS,
                    head_channels: tuple[int, ...] = HEAD_CHANNELS,
                    dilations: tuple[int, ...] = DILATIONS) -> RemParams:
    convs = []
    width = in_channels
    for _ in dilations:
        convs.append((_he(rng, (conv_channels, width, 3), width * 3),
                      _zeros((conv_channels,))))
        width += conv_channels
    fusion = (_he(rng, (fusion_channels, width, 1, 1), width), _zeros((fusion_channels,)))
    head = []
    head_in = width + fusion_channels
    for h in head_channels:
        head.append((_he(rng, (h, head_in), head_in), _zeros((h,))))
        head_in = h
    head.append((_he(rng, (NUM_CLASSES, head_in), head_in), _zeros((NUM_CLASSES,))))
    return RemParams(convs=convs, fusion=fusion, head=head, dilations=tuple(dilations))


@dataclass
class CornerPrediction:
    """Sigmoid scores (4 x 2K) and their row-normalized distributions."""

    scores: Tensor
    norm_rows: Tensor

    @property
    def length(self) -> int:
        return self.scores.shape[1]


def _conv1x1_seq(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """1x1 convolution over a (c, length) sequence: a per-position dense layer."""
    if w.ndim == 4:  # stored as (out, in, 1, 1)
        w = T.reshape(w, (w.shape[0], w.shape[1]))
    return T.transpose(T.dense(T.transpose(x), T.transpose(w), b))


def rem_forward(fc: Tensor, params: RemParams) -> CornerPrediction:
    """Score every vertex against the four corner classes.

    ``fc`` is the (2K, 108) per-vertex feature matrix. Internally the
    sequence runs channels-first so the circular convolutions see the
    closed-contour cyclicity directly.
    """
    if fc.ndim != 2 or fc.shape[1] != params.convs[0][0].shape[1]:
        raise ShapeError(f"rem_forward: features {fc.shape} do not match "
                         f"input width {params.convs[0][0].shape[1]}")
    length = fc.shape[0]
    x = T.transpose(fc)  # (108, 2K)
    feats = [x]
    for (w, b), dil in zip(params.convs, params.dilations):
        h = T.relu(T.conv1d_circular(T.concat(feats, axis=0), w, b, dilation=dil))
        feats.append(h)
    cat_all = T.concat(feats, axis=0)
    fused = T.relu(_conv1x1_seq(cat_all, *params.fusion))
    pooled = T.global_max_pool(fused)  # (fusion_channels,)
    per_vertex = T.concat([cat_all, T.broadcast_row(pooled, length)], axis=0)
    h = per_vertex
    for w, b in params.head[:-1]:
        h = T.relu(_conv1x1_seq(h, w, b))
    scores = T.sigmoid(_conv1x1_seq(h, *params.head[-1]))  # (4, 2K)
    return CornerPrediction(scores=scores, norm_rows=T.row_normalize(scores))


def _check_labels(labels: np.ndarray, length: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (NUM_CLASSES, length):
        raise ShapeError(f"labels must be (4, {length}), got {labels.shape}")
    if not np.array_equal(labels, labels.astype(bool).astype(float)):
        raise ShapeError("labels must be binary")
    if not np.array_equal(labels.sum(axis=1), np.ones(NUM_CLASSES)):
        raise ShapeError("each label row must be one-hot")
    idx = labels.argmax(axis=1)
    if len(set(idx.tolist())) != NUM_CLASSES:
        raise ShapeError("labeled corner indices must be distinct")
    return labels


def reading_order_loss(pred: CornerPrediction, labels: np.ndarray,
                       alpha: float = 0.1) -> Tensor:
    """Joint corner loss: log loss + alpha * (orthogonality + distribution).

    The orthogonality term compares the row-normalized class-similarity
    matrix against a smoothed identity; prediction and target receive the
    same (1-eps)*X + eps/4 smoothing so a perfect prediction scores exactly
    zero while the KL stays finite.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    length = pred.length
    y = _check_labels(labels, length)
    # per-point BCE summed over classes and vertices, normalized by 2K
    lc = T.scale(T.bce(pred.scores, Tensor(y)), float(NUM_CLASSES))

    sim = T.row_normalize(T.matmul(pred.norm_rows, T.transpose(pred.norm_rows)))
    eps = IDENTITY_SMOOTHING
    sim_sm = T.affine(sim, 1.0 - eps, eps / NUM_CLASSES)
    target = (1.0 - eps) * np.eye(NUM_CLASSES) + eps / NUM_CLASSES
    # mean KL over the 4 similarity rows
    lo = T.scale(T.kl_div(sim_sm, Tensor(target)), 1.0 / NUM_CLASSES)

    pred_marginal = T.row_normalize(T.reshape(T.tsum_axis(pred.norm_rows, 0), (1, length)))
    pred_sm = T.affine(pred_marginal, 1.0 - eps, eps / length)
    label_marginal = y.sum(axis=0, keepdims=True) / NUM_CLASSES
    label_sm = (1.0 - eps) * label_marginal + eps / length
    ld = T.kl_div(pred_sm, Tensor(label_sm))

    return T.add(lc, T.scale(T.add(lo, ld), alpha))


def _cyclic_tuples(length: int):
    """All distinct index 4-tuples in cyclic order 0->1->2->3, as arrays."""
    combos = np.array(list(itertools.combinations(range(length), NUM_CLASSES)))
    return combos


def decode_corners(pred: CornerPrediction) -> tuple[tuple[int, int, int, int], bool]:
    """Pick one vertex per class maximizing the joint log-probability.

    Indices are constrained to be distinct and cyclically ordered along the
    contour. Returns the chosen indices and a low-confidence flag. Exhaustive
    search is used up to length 64, a greedy sweep beyond.
    """
    logp = np.log(np.maximum(pred.norm_rows.data, 1e-300))
    length = pred.length
    if length <= EXHAUSTIVE_MAX_LENGTH:
        combos = _cyclic_tuples(length)  # (m, 4) sorted positions
        best_val, best = -np.inf, None
        for rot in range(NUM_CLASSES):
            classes = (rot + np.arange(NUM_CLASSES)) % NUM_CLASSES
            vals = logp[classes[None, :], combos].sum(axis=1)
            i = int(vals.argmax())
            if vals[i] > best_val:
                best_val = float(vals[i])
                order = np.empty(NUM_CLASSES, dtype=int)
                order[classes] = combos[i]
                best = tuple(int(v) for v in order)
    else:
        best, best_val = _decode_greedy(logp)
    return best, best_val < LOW_CONFIDENCE_LOGPROB


def _decode_greedy(logp: np.ndarray) -> tuple[tuple[int, int, int, int], float]:
    """Anchor class 0 at each position, then extend greedily in cyclic order."""
    length = logp.shape[1]
    best_val, best = -np.inf, (0, 1, 2, 3)
    for i0 in np.argsort(logp[0])[::-1][:8]:
        picked = [int(i0)]
        total = logp[0, i0]
        ok = True
        for cls in range(1, NUM_CLASSES):
            # positions strictly after the previous pick, before wrapping to i0
            rel = (np.arange(length) - i0) % length
            prev_rel = (picked[-1] - i0) % length
            cand = np.where(rel > prev_rel)[0]
            if len(cand) == 0:
                ok = False
                break
            j = cand[np.argmax(logp[cls, cand])]
            picked.append(int(j))
            total += logp[cls, j]
        if ok and total > best_val:
            best_val = float(total)
            best = tuple(picked)
    return best, best_val
