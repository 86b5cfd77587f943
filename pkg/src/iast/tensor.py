"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Every quantity the model differentiates through lives in a :class:`Tensor`.
Operations record a backward closure; :func:`backward` walks the graph in
reverse topological order and accumulates gradients into parameter leaves.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

EPS = 1e-12
SMOOTH_L1_THRESHOLD = 1.0


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._op: str | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # Convenience arithmetic; the heavy lifting is in the module functions.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), scale(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, op: str, parents: tuple[Tensor, ...],
          backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        out._op = op
    return out


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar loss.

    Parameter leaves (requires_grad=True, no producing op) accumulate into
    ``.grad``; calling backward twice without zeroing doubles their grads.
    """
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.data.shape)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is not None:
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = np.array(pg, dtype=np.float64)
        elif node.requires_grad:
            if node.grad is None:
                node.grad = np.array(g, dtype=np.float64)
            else:
                node.grad = node.grad + g


# ---------------------------------------------------------------------------
# elementwise and linear-algebra primitives


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("add", a, b)
    return _node(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("mul", a, b)
    return _node(a.data * b.data, "mul", (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _node(a.data * c, "scale", (a,), lambda g: (g * c,))


def affine(a: Tensor, w: float, b: float) -> Tensor:
    """Elementwise w*a + b with python-scalar coefficients."""
    w, b = float(w), float(b)
    return _node(a.data * w + b, "affine", (a,), lambda g: (g * w,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    return _node(a.data @ b.data, "matmul", (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x (n, in), w (in, out), b (out,)."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense: incompatible shapes x{x.shape} w{w.shape} b{b.shape}")
    return _node(x.data @ w.data + b.data, "dense", (x, w, b),
                 lambda g: (g @ w.data.T, x.data.T @ g, g.sum(axis=0)))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(data, "concat", tuple(tensors), bwd)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d, got {a.shape}")
    return _node(a.data.T, "transpose", (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _node(a.data.reshape(shape), "reshape", (a,), lambda g: (g.reshape(old),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _node(s, "sigmoid", (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _node(t, "tanh", (a,), lambda g: (g * (1.0 - t * t),))


def log_clamped(a: Tensor, eps: float = EPS) -> Tensor:
    clamped = np.maximum(a.data, eps)
    mask = a.data >= eps
    return _node(np.log(clamped), "log_clamped", (a,), lambda g: (g * mask / clamped,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return _node(s, "softmax", (a,), bwd)


def row_normalize(a: Tensor) -> Tensor:
    """Divide each row of a 2-d tensor by its sum."""
    if a.ndim != 2:
        raise ShapeError(f"row_normalize: expected 2-d, got {a.shape}")
    s = a.data.sum(axis=1, keepdims=True)
    out = a.data / s

    def bwd(g):
        return ((g - (g * out).sum(axis=1, keepdims=True)) / s,)

    return _node(out, "row_normalize", (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    shape = a.shape
    return _node(np.asarray(a.data.sum()), "sum", (a,),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.size
    shape = a.shape
    return _node(np.asarray(a.data.mean()), "mean", (a,),
                 lambda g: (np.broadcast_to(g / n, shape).copy(),))


def tsum_axis(a: Tensor, axis: int) -> Tensor:
    n = a.shape[axis]

    def bwd(g):
        return (np.repeat(np.expand_dims(g, axis), n, axis=axis),)

    return _node(a.data.sum(axis=axis), "sum_axis", (a,), bwd)


def mean_axis(a: Tensor, axis: int) -> Tensor:
    n = a.shape[axis]

    def bwd(g):
        return (np.repeat(np.expand_dims(g / n, axis), n, axis=axis),)

    return _node(a.data.mean(axis=axis), "mean_axis", (a,), bwd)


def global_max_pool(a: Tensor) -> Tensor:
    """Max over the last axis (first index wins ties)."""
    idx = a.data.argmax(axis=-1)
    out = np.take_along_axis(a.data, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        da = np.zeros_like(a.data)
        np.put_along_axis(da, idx[..., None], g[..., None], axis=-1)
        return (da,)

    return _node(out, "global_max_pool", (a,), bwd)


def broadcast_row(v: Tensor, n: int) -> Tensor:
    """Tile a vector (c,) into a (c, n) matrix, one copy per column."""
    if v.ndim != 1:
        raise ShapeError(f"broadcast_row: expected 1-d, got {v.shape}")
    return _node(np.repeat(v.data[:, None], n, axis=1), "broadcast_row", (v,),
                 lambda g: (g.sum(axis=1),))


def gather_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup with scatter-add backward (embedding table access)."""
    indices = np.asarray(indices, dtype=np.intp)
    if indices.min(initial=0) < 0 or indices.max(initial=-1) >= table.shape[0]:
        raise ShapeError(f"gather_rows: index out of range for table {table.shape}")

    def bwd(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, indices, g)
        return (dt,)

    return _node(table.data[indices], "gather_rows", (table,), bwd)


# ---------------------------------------------------------------------------
# convolution and sampling


_CONV1D_TAPS = np.array([-1, 0, 1])


def conv1d_circular(x: Tensor, w: Tensor, b: Tensor, dilation: int = 1) -> Tensor:
    """1-d convolution with indices wrapped modulo the sequence length.

    x is (c_in, length), w is (c_out, c_in, 3), b is (c_out,).
    """
    if dilation < 1:
        raise ShapeError(f"conv1d_circular: dilation must be >= 1, got {dilation}")
    if x.ndim != 2 or w.ndim != 3 or w.shape[2] != 3 or w.shape[1] != x.shape[0]:
        raise ShapeError(f"conv1d_circular: incompatible shapes x{x.shape} w{w.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"conv1d_circular: bias {b.shape} vs c_out {w.shape[0]}")
    length = x.shape[1]
    cin, cout = x.shape[0], w.shape[0]
    idx = (np.arange(length)[None, :] + _CONV1D_TAPS[:, None] * dilation) % length
    xg = x.data[:, idx]  # (c_in, 3, length)
    wmat = w.data.reshape(cout, cin * 3)
    out = wmat @ xg.reshape(cin * 3, length) + b.data[:, None]

    def bwd(g):
        dw = (g @ xg.reshape(cin * 3, length).T).reshape(w.shape)
        db = g.sum(axis=1)
        dxg = (wmat.T @ g).reshape(cin, 3, length)
        dx = np.zeros_like(x.data)
        np.add.at(dx, (slice(None), idx), dxg)
        return (dx, dw, db)

    return _node(out, "conv1d_circular", (x, w, b), bwd)


def conv2d(x: Tensor, w: Tensor, b: Tensor, dilation: int = 1) -> Tensor:
    """Same-size 2-d convolution with zero padding, square odd kernel.

    x is (c_in, h, w), weight is (c_out, c_in, k, k) with k odd.
    """
    if dilation < 1:
        raise ShapeError(f"conv2d: dilation must be >= 1, got {dilation}")
    if x.ndim != 3 or w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[1] != x.shape[0]:
        raise ShapeError(f"conv2d: incompatible shapes x{x.shape} w{w.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"conv2d: bias {b.shape} vs c_out {w.shape[0]}")
    cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    if k % 2 != 1:
        raise ShapeError(f"conv2d: kernel size must be odd, got {k}")
    pad = dilation * (k // 2)
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    # im2col: gather the k*k taps into one matrix and use a single matmul.
    cols = np.empty((k * k * cin, h * wd))
    for a in range(k):
        for c in range(k):
            patch = xp[:, a * dilation:a * dilation + h, c * dilation:c * dilation + wd]
            cols[(a * k + c) * cin:(a * k + c + 1) * cin] = patch.reshape(cin, -1)
    wmat = w.data.transpose(2, 3, 1, 0).reshape(k * k * cin, cout)
    out = (wmat.T @ cols).reshape(cout, h, wd) + b.data[:, None, None]

    def bwd(g):
        gm = g.reshape(cout, -1)
        dwmat = cols @ gm.T  # (k*k*cin, cout)
        dw = dwmat.reshape(k, k, cin, cout).transpose(3, 2, 0, 1)
        db = gm.sum(axis=1)
        dcols = wmat @ gm  # (k*k*cin, h*wd)
        dxp = np.zeros_like(xp)
        for a in range(k):
            for c in range(k):
                patch = dcols[(a * k + c) * cin:(a * k + c + 1) * cin].reshape(cin, h, wd)
                dxp[:, a * dilation:a * dilation + h, c * dilation:c * dilation + wd] += patch
        dx = dxp[:, pad:pad + h, pad:pad + wd] if pad else dxp
        return (dx, dw, db)

    return _node(out, "conv2d", (x, w, b), bwd)


def bilinear_sample(img: Tensor, coords: Tensor) -> Tensor:
    """Bilinear sampling of a (c, h, w) raster at (n, 2) pixel coords (x, y).

    Coordinates are clamped to the valid image rectangle; the result is
    (n, c) and differentiable with respect to both the raster and the
    coordinates (clamped points get zero coordinate gradient).
    """
    if img.ndim != 3 or coords.ndim != 2 or coords.shape[1] != 2:
        raise ShapeError(f"bilinear_sample: incompatible shapes img{img.shape} coords{coords.shape}")
    c, h, w = img.shape
    xc = np.clip(coords.data[:, 0], 0.0, w - 1.0)
    yc = np.clip(coords.data[:, 1], 0.0, h - 1.0)
    x0 = np.clip(np.floor(xc).astype(np.intp), 0, w - 2) if w > 1 else np.zeros(len(xc), np.intp)
    y0 = np.clip(np.floor(yc).astype(np.intp), 0, h - 2) if h > 1 else np.zeros(len(yc), np.intp)
    fx = xc - x0
    fy = yc - y0
    v00 = img.data[:, y0, x0]      # (c, n)
    v01 = img.data[:, y0, x0 + 1] if w > 1 else v00
    v10 = img.data[:, y0 + 1, x0] if h > 1 else v00
    v11 = img.data[:, y0 + 1, x0 + 1] if h > 1 and w > 1 else v00
    out = (v00 * (1 - fx) * (1 - fy) + v01 * fx * (1 - fy)
           + v10 * (1 - fx) * fy + v11 * fx * fy).T  # (n, c)

    in_x = (coords.data[:, 0] > 0.0) & (coords.data[:, 0] < w - 1.0)
    in_y = (coords.data[:, 1] > 0.0) & (coords.data[:, 1] < h - 1.0)

    def bwd(g):
        gt = g.T  # (c, n)
        dimg = np.zeros_like(img.data)
        np.add.at(dimg, (slice(None), y0, x0), gt * (1 - fx) * (1 - fy))
        if w > 1:
            np.add.at(dimg, (slice(None), y0, x0 + 1), gt * fx * (1 - fy))
        if h > 1:
            np.add.at(dimg, (slice(None), y0 + 1, x0), gt * (1 - fx) * fy)
        if h > 1 and w > 1:
            np.add.at(dimg, (slice(None), y0 + 1, x0 + 1), gt * fx * fy)
        dvdx = ((v01 - v00) * (1 - fy) + (v11 - v10) * fy)
        dvdy = ((v10 - v00) * (1 - fx) + (v11 - v01) * fx)
        dcoords = np.stack([(gt * dvdx).sum(axis=0) * in_x,
                            (gt * dvdy).sum(axis=0) * in_y], axis=1)
        return (dimg, dcoords)

    return _node(out, "bilinear_sample", (img, coords), bwd)


# ---------------------------------------------------------------------------
# losses (scalar outputs)


def bce(pred: Tensor, target: Tensor) -> Tensor:
    """Mean elementwise binary cross entropy, inputs clamped away from 0/1."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    _check_same_shape("bce", pred, target)
    p = np.clip(pred.data, EPS, 1.0 - EPS)
    t = target.data
    n = p.size
    out = -(t * np.log(p) + (1 - t) * np.log(1 - p)).mean()

    def bwd(g):
        dp = g * (-(t / p) + (1 - t) / (1 - p)) / n
        dt = g * (np.log(1 - p) - np.log(p)) / n
        return (dp, _unbroadcast(dt, target.shape))

    return _node(np.asarray(out), "bce", (pred, target), bwd)


def kl_div(p: Tensor, q: Tensor) -> Tensor:
    """Sum of p * log(p/q) with both inputs clamped to >= EPS before the log."""
    p, q = _as_tensor(p), _as_tensor(q)
    _check_same_shape("kl_div", p, q)
    pc = np.maximum(p.data, EPS)
    qc = np.maximum(q.data, EPS)
    lr = np.log(pc) - np.log(qc)
    out = (pc * lr).sum()

    def bwd(g):
        dp = g * (lr + 1.0) * (p.data >= EPS)
        dq = g * (-(pc / qc)) * (q.data >= EPS)
        return (dp, dq)

    return _node(np.asarray(out), "kl_div", (p, q), bwd)


def smooth_l1(pred: Tensor, target: Tensor) -> Tensor:
    """Summed elementwise Smooth-L1 with the standard threshold of 1."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    _check_same_shape("smooth_l1", pred, target)
    d = pred.data - target.data
    quad = np.abs(d) < SMOOTH_L1_THRESHOLD
    out = np.where(quad, 0.5 * d * d, np.abs(d) - 0.5).sum()

    def bwd(g):
        dd = g * np.where(quad, d, np.sign(d))
        return (_unbroadcast(dd, pred.shape), _unbroadcast(-dd, target.shape))

    return _node(np.asarray(out), "smooth_l1", (pred, target), bwd)


def cross_entropy(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean -log p[row, label] over rows of a (n, classes) probability matrix."""
    labels = np.asarray(labels, dtype=np.intp)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ShapeError(f"cross_entropy: probs {probs.shape} vs labels {labels.shape}")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ShapeError("cross_entropy: label out of range")
    n = probs.shape[0]
    rows = np.arange(n)
    picked = np.maximum(probs.data[rows, labels], EPS)
    out = -np.log(picked).mean()

    def bwd(g):
        dp = np.zeros_like(probs.data)
        dp[rows, labels] = -g / (n * picked) * (probs.data[rows, labels] >= EPS)
        return (dp,)

    return _node(np.asarray(out), "cross_entropy", (probs,), bwd)


# ---------------------------------------------------------------------------
# op registry


def _apply_concat(inputs, axis=0):
    return concat(inputs, axis=axis)


_OPS: dict[str, Callable] = {
    "matmul": lambda inputs, **kw: matmul(*inputs),
    "add": lambda inputs, **kw: add(*inputs),
    "mul": lambda inputs, **kw: mul(*inputs),
    "concat": lambda inputs, **kw: _apply_concat(inputs, **kw),
    "conv1d_circular": lambda inputs, **kw: conv1d_circular(*inputs, **kw),
    "conv2d": lambda inputs, **kw: conv2d(*inputs, **kw),
    "dense": lambda inputs, **kw: dense(*inputs),
    "relu": lambda inputs, **kw: relu(*inputs),
    "sigmoid": lambda inputs, **kw: sigmoid(*inputs),
    "tanh": lambda inputs, **kw: tanh(*inputs),
    "softmax": lambda inputs, **kw: softmax(*inputs, **kw),
    "global_max_pool": lambda inputs, **kw: global_max_pool(*inputs),
    "mean": lambda inputs, **kw: mean(*inputs),
    "bce": lambda inputs, **kw: bce(*inputs),
    "kl_div": lambda inputs, **kw: kl_div(*inputs),
    "smooth_l1": lambda inputs, **kw: smooth_l1(*inputs),
    "cross_entropy": lambda inputs, **kw: cross_entropy(inputs[0], kw["labels"]),
    "bilinear_sample": lambda inputs, **kw: bilinear_sample(*inputs),
    "broadcast_row": lambda inputs, **kw: broadcast_row(inputs[0], kw["n"]),
}

OP_KINDS = tuple(sorted(_OPS))


def apply(kind: str, inputs: Sequence[Tensor], **params) -> Tensor:
    """Dispatch an operation by name (the OpKind surface)."""
    if kind not in _OPS:
        raise ShapeError(f"apply: unknown op kind {kind!r}")
    return _OPS[kind]([_as_tensor(t) for t in inputs], **params)
