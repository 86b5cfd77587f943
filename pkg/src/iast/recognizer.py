"""Minimal differentiable recognizer over sampled grid features.

Columns of the sampled grid are reduced by a mean over the vertical axis,
pushed through two dense layers, and normalized per column with softmax.
Its only job is to read the synthetic glyphs well enough that its loss
gradient trains the dynamic sampling offsets upstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
BLANK = len(ALPHABET)  # 36
NUM_SYMBOLS = len(ALPHABET) + 1  # 37
HIDDEN = 64


@dataclass
class RecognizerParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def named(self, prefix: str = "rec.") -> dict[str, Tensor]:
        return {f"{prefix}w1": self.w1, f"{prefix}b1": self.b1,
                f"{prefix}w2": self.w2, f"{prefix}b2": self.b2}


def init_recognizer_params(rng: np.random.Generator, in_channels: int = 32,
                           hidden: int = HIDDEN) -> RecognizerParams:
    return RecognizerParams(
        w1=Tensor(rng.normal(0.0, np.sqrt(2.0 / in_channels), (in_channels, hidden)),
                  requires_grad=True),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=Tensor(rng.normal(0.0, np.sqrt(2.0 / hidden), (hidden, NUM_SYMBOLS)),
                  requires_grad=True),
        b2=Tensor(np.zeros(NUM_SYMBOLS), requires_grad=True),
    )


def recognize(sampled: Tensor, params: RecognizerParams) -> Tensor:
    """Per-column class distributions, (w_o, 37), rows summing to 1."""
    if sampled.ndim != 3 or sampled.shape[0] != params.w1.shape[0]:
        raise ShapeError(f"recognize: expected ({params.w1.shape[0]}, h, w) features, "
                         f"got {sampled.shape}")
    cols = T.transpose(T.mean_axis(sampled, axis=1))  # (w_o, C)
    h = T.relu(T.dense(cols, params.w1, params.b1))
    return T.softmax(T.dense(h, params.w2, params.b2), axis=1)


def recognition_loss(probs: Tensor, col_labels: np.ndarray) -> Tensor:
    """Mean per-column cross entropy against blank-padded aligned labels."""
    labels = np.asarray(col_labels, dtype=np.intp)
    if labels.shape != (probs.shape[0],):
        raise ShapeError(f"recognition_loss: {len(labels)} labels for "
                         f"{probs.shape[0]} columns")
    if labels.min() < 0 or labels.max() >= NUM_SYMBOLS:
        raise ShapeError("recognition_loss: label out of alphabet")
    return T.cross_entropy(probs, labels)


def greedy_decode(probs: np.ndarray | Tensor) -> str:
    """Argmax per column, collapse repeats, strip blanks."""
    data = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    ids = data.argmax(axis=1)
    out = []
    prev = -1
    for i in ids:
        if i != prev and i != BLANK:
            out.append(ALPHABET[i])
        prev = i
    return "".join(out)


def labels_to_string(col_labels: np.ndarray) -> str:
    out = []
    prev = -1
    for i in col_labels:
        if i != prev and i != BLANK:
            out.append(ALPHABET[i])
        prev = i
    return "".join(out)
