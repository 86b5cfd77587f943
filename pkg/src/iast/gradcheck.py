"""Finite-difference verification of every differentiable primitive.

Each op kind gets a deterministic input builder; the check compares analytic
gradients against central differences with h = 1e-5 and reports the max
relative error |analytic - numeric| / max(1, |analytic|).
"""

from __future__ import annotations

import zlib
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor

H = 1e-5
TOLERANCE = 1e-4


def numeric_gradient(forward: Callable[[], Tensor], x: Tensor, h: float = H,
                     elements: np.ndarray | None = None) -> np.ndarray:
    """Central-difference gradient of a re-runnable scalar closure w.r.t. x.

    The closure must rebuild its graph over x's live data buffer.
    ``elements`` optionally restricts the check to a flat index subset; the
    returned array matches x's shape with unchecked entries set to NaN.
    """
    flat = x.data.reshape(-1)
    idxs = np.arange(flat.size) if elements is None else np.asarray(elements)
    g = np.full(flat.size, np.nan)
    for i in idxs:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(forward().data)
        flat[i] = orig - h
        fm = float(forward().data)
        flat[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return g.reshape(x.shape)


def check_gradients(inputs: Sequence[Tensor], forward: Callable[[], Tensor],
                    max_elements: int | None = None,
                    rng: np.random.Generator | None = None,
                    skip_kinks: bool = False) -> float:
    """Max relative gradient error of ``forward`` w.r.t. the given inputs.

    With ``skip_kinks`` the numeric gradient is evaluated at two step sizes
    and elements where the two estimates disagree are excluded: those sit on
    a measure-zero nondifferentiability (a relu kink or a bilinear pixel
    boundary) crossed by the difference window, where no finite-difference
    reference exists. A wrong analytic gradient stays detected because both
    step sizes then agree with each other and disagree with the analytic one.
    """
    loss = forward()
    if not np.isfinite(loss.data).all():
        return float("inf")
    for x in inputs:
        x.zero_grad()
        x.requires_grad = True
    T.backward(forward())
    worst = 0.0
    for x in inputs:
        analytic = x.grad if x.grad is not None else np.zeros(x.shape)
        elements = None
        if max_elements is not None and x.data.size > max_elements:
            r = rng or np.random.default_rng(0)
            elements = r.choice(x.data.size, size=max_elements, replace=False)
        numeric = numeric_gradient(forward, x, elements=elements)
        mask = ~np.isnan(numeric)
        if skip_kinks:
            half = numeric_gradient(forward, x, h=H / 2, elements=elements)
            agree = np.abs(numeric - half) <= 1e-5 * np.maximum(1.0, np.abs(numeric))
            mask &= agree
        if not mask.any():
            continue
        err = np.abs(analytic - numeric)[mask] / np.maximum(1.0, np.abs(analytic)[mask])
        worst = max(worst, float(err.max()))
    return worst


def _param(rng, shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, shape), requires_grad=True)


def _prob_rows(rng, shape):
    x = rng.uniform(0.2, 1.0, shape)
    x /= x.sum(axis=-1, keepdims=True)
    return Tensor(x, requires_grad=True)


def _offgrid_coords(rng, n, h, w):
    """Coordinates at least 0.01 px away from pixel centers (bilinear kinks)."""
    xs = rng.integers(0, w - 1, n) + rng.uniform(0.05, 0.95, n)
    ys = rng.integers(0, h - 1, n) + rng.uniform(0.05, 0.95, n)
    return Tensor(np.stack([xs, ys], axis=1), requires_grad=True)


def _weighted_sum(weights: np.ndarray) -> Callable[[Tensor], Tensor]:
    wt = Tensor(weights)
    return lambda out: T.tsum(T.mul(out, wt))


def build_case(kind: str, seed: int) -> tuple[list[Tensor], Callable[[], Tensor]]:
    """Deterministic inputs plus a re-runnable scalar forward for one op kind."""
    rng = np.random.default_rng([seed, zlib.crc32(kind.encode())])
    if kind == "matmul":
        a, b = _param(rng, (3, 4)), _param(rng, (4, 5))
        w = _weighted_sum(rng.standard_normal((3, 5)))
        return [a, b], lambda: w(T.matmul(a, b))
    if kind == "add":
        a, b = _param(rng, (3, 4)), _param(rng, (3, 4))
        w = _weighted_sum(rng.standard_normal((3, 4)))
        return [a, b], lambda: w(T.add(a, b))
    if kind == "mul":
        a, b = _param(rng, (3, 4)), _param(rng, (3, 4))
        w = _weighted_sum(rng.standard_normal((3, 4)))
        return [a, b], lambda: w(T.mul(a, b))
    if kind == "concat":
        a, b = _param(rng, (2, 3)), _param(rng, (4, 3))
        w = _weighted_sum(rng.standard_normal((6, 3)))
        return [a, b], lambda: w(T.concat([a, b], axis=0))
    if kind == "conv1d_circular":
        x, k, b = _param(rng, (3, 16)), _param(rng, (5, 3, 3)), _param(rng, (5,))
        w = _weighted_sum(rng.standard_normal((5, 16)))
        return [x, k, b], lambda: w(T.conv1d_circular(x, k, b, dilation=4))
    if kind == "conv2d":
        x, k, b = _param(rng, (2, 6, 7)), _param(rng, (3, 2, 3, 3)), _param(rng, (3,))
        w = _weighted_sum(rng.standard_normal((3, 6, 7)))
        return [x, k, b], lambda: w(T.conv2d(x, k, b, dilation=2))
    if kind == "dense":
        x, k, b = _param(rng, (4, 3)), _param(rng, (3, 5)), _param(rng, (5,))
        w = _weighted_sum(rng.standard_normal((4, 5)))
        return [x, k, b], lambda: w(T.dense(x, k, b))
    if kind == "relu":
        x = _param(rng, (4, 5))
        x.data[np.abs(x.data) < 0.01] += 0.05  # keep clear of the kink
        w = _weighted_sum(rng.standard_normal((4, 5)))
        return [x], lambda: w(T.relu(x))
    if kind == "sigmoid":
        x = _param(rng, (4,), -3, 3)
        w = _weighted_sum(rng.standard_normal((4,)))
        return [x], lambda: w(T.sigmoid(x))
    if kind == "tanh":
        x = _param(rng, (4, 3), -3, 3)
        w = _weighted_sum(rng.standard_normal((4, 3)))
        return [x], lambda: w(T.tanh(x))
    if kind == "softmax":
        x = _param(rng, (3, 5), -2, 2)
        w = _weighted_sum(rng.standard_normal((3, 5)))
        return [x], lambda: w(T.softmax(x, axis=1))
    if kind == "global_max_pool":
        x = _param(rng, (3, 8))
        w = _weighted_sum(rng.standard_normal((3,)))
        return [x], lambda: w(T.global_max_pool(x))
    if kind == "mean":
        x = _param(rng, (4, 5))
        return [x], lambda: T.mean(x)
    if kind == "bce":
        p = Tensor(rng.uniform(0.05, 0.95, (3, 4)), requires_grad=True)
        t = Tensor(rng.uniform(0.0, 1.0, (3, 4)), requires_grad=True)
        return [p, t], lambda: T.bce(p, t)
    if kind == "kl_div":
        p, q = _prob_rows(rng, (3, 5)), _prob_rows(rng, (3, 5))
        return [p, q], lambda: T.kl_div(p, q)
    if kind == "smooth_l1":
        a, b = _param(rng, (4, 2), -2, 2), _param(rng, (4, 2), -2, 2)
        d = np.abs(a.data - b.data)
        a.data[np.abs(d - 1.0) < 0.01] += 0.05  # keep clear of the threshold
        return [a, b], lambda: T.smooth_l1(a, b)
    if kind == "cross_entropy":
        p = _prob_rows(rng, (4, 6))
        labels = rng.integers(0, 6, 4)
        return [p], lambda: T.cross_entropy(p, labels)
    if kind == "bilinear_sample":
        img = _param(rng, (1, 8, 8))
        coords = _offgrid_coords(rng, 5, 8, 8)
        w = _weighted_sum(rng.standard_normal((5, 1)))
        return [img, coords], lambda: w(T.bilinear_sample(img, coords))
    if kind == "broadcast_row":
        v = _param(rng, (4,))
        w = _weighted_sum(rng.standard_normal((4, 6)))
        return [v], lambda: w(T.broadcast_row(v, 6))
    raise ValueError(f"no gradcheck case for op kind {kind!r}")


COMPOSED_PATHS = ("corner_path", "refine_path", "sampling_path")


def build_composed_case(name: str, seed: int) -> tuple[list[Tensor], Callable[[], Tensor]]:
    """Small end-to-end forward paths through the real modules.

    Inputs are scaled down (short boundaries, tiny rasters, coarse grids) so
    finite differencing stays fast; each case returns the trainable tensors
    it exercises plus a scalar-loss closure.
    """
    from . import brm, dsm, recognizer, rem
    from .geometry import ControlPointSet

    rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
    if name == "corner_path":
        length, in_ch = 8, 6
        params = rem.init_rem_params(rng, in_channels=in_ch, conv_channels=4,
                                     fusion_channels=4, head_channels=(5,))
        fc = Tensor(rng.normal(0.0, 1.0, (length, in_ch)), requires_grad=True)
        labels = np.zeros((4, length))
        for cls, i in enumerate(sorted(rng.choice(length, 4, replace=False))):
            labels[cls, i] = 1.0

        def forward():
            pred = rem.rem_forward(fc, params)
            return rem.reading_order_loss(pred, labels)

        return [fc] + list(params.named().values()), forward
    if name == "refine_path":
        k = 6
        params = brm.init_brm_params(rng, channels=4)
        # break the zero-init head so offsets and later iterations carry
        # grads, and the zero biases so no relu pre-activation sits exactly
        # on its kink (zero bias + dead inputs pins it at 0.0)
        for p in params.named().values():
            if not p.data.any():
                p.data = rng.normal(0.0, 0.05, p.shape)
        feat = Tensor(rng.uniform(0.0, 1.0, (36, 9, 9)), requires_grad=True)
        theta = np.linspace(0.0, 2 * np.pi, k, endpoint=False)
        pts = np.stack([4.0 + 2.4 * np.cos(theta), 4.0 + 1.6 * np.sin(theta)], axis=1)
        points0 = Tensor(pts + rng.uniform(0.05, 0.2, pts.shape), requires_grad=True)
        target = pts + rng.normal(0.0, 0.3, pts.shape)

        def forward():
            history = []
            pts_t = points0
            for _ in range(2):
                pts_t = _brm_step_with_tensor(pts_t, feat, params)
                history.append(pts_t)
            return brm.brm_loss(history, target)

        return [points0, feat] + list(params.named().values()), forward
    if name == "sampling_path":
        k, w_o, h_o, c = 6, 8, 4, 32
        dparams = dsm.init_dsm_params(rng, in_channels=c, channels=4)
        for p in dparams.named().values():
            if not p.data.any():  # see refine_path: keep relu kinks off 0.0
                p.data = rng.normal(0.0, 0.05, p.shape)
        rparams = recognizer.init_recognizer_params(rng, in_channels=c, hidden=5)
        for p in rparams.named().values():
            if not p.data.any():
                p.data = rng.normal(0.0, 0.05, p.shape)
        feat = Tensor(rng.uniform(0.0, 1.0, (c, 10, 12)), requires_grad=True)
        u = np.linspace(2.0, 9.0, k // 2)
        controls = Tensor(np.vstack([
            np.stack([u, np.full(k // 2, 2.5)], axis=1),
            np.stack([u, np.full(k // 2, 7.5)], axis=1),
        ]) + rng.uniform(0.02, 0.1, (k, 2)), requires_grad=True)
        labels = rng.integers(0, recognizer.NUM_SYMBOLS, w_o)
        # the offset scale (control bbox) is treated as a constant by the
        # model, so pin it; otherwise finite differences see its dependence
        # on the perturbed control points
        bbox = (float(np.ptp(controls.data[:, 0])), float(np.ptp(controls.data[:, 1])))

        def forward():
            transform = dsm.tps_solve(ControlPointSet(controls.data))
            grid = dsm.tps_grid(transform, controls, w_o, h_o)
            grid.bbox_w, grid.bbox_h = bbox
            grid = _dsm_offsets_with_tensor(feat, grid, dparams)
            sampled = _grid_sample_with_tensor(feat, grid)
            probs = recognizer.recognize(sampled, rparams)
            return recognizer.recognition_loss(probs, labels)

        params = [controls, feat] + list(dparams.named().values()) \
            + list(rparams.named().values())
        return params, forward
    raise ValueError(f"no composed gradcheck case for {name!r}")


def _brm_step_with_tensor(points: Tensor, feat: Tensor, params) -> Tensor:
    """brm_refine with the raster kept in the autodiff graph."""
    _, h, w = feat.shape
    sampled = T.bilinear_sample(feat, points)
    norm = T.matmul(points, Tensor(np.diag([1.0 / w, 1.0 / h])))
    x = T.transpose(T.concat([sampled, norm], axis=1))
    for cw, cb in params.convs:
        x = T.relu(T.conv1d_circular(x, cw, cb, dilation=1))
    hw, hb = params.head
    offsets = T.transpose(T.dense(T.transpose(x), T.transpose(hw), hb))
    return T.add(points, T.transpose(offsets))


def _dsm_offsets_with_tensor(feat: Tensor, grid, params):
    """dynamic_offsets with the raster kept in the autodiff graph."""
    from . import dsm
    h_o, w_o = grid.h_o, grid.w_o
    sampled = T.bilinear_sample(feat, grid.base)
    f = T.reshape(T.transpose(sampled), (sampled.shape[1], h_o, w_o))
    f = T.relu(T.conv2d(f, *params.conv1, dilation=3))
    f = T.relu(T.conv2d(f, *params.conv2, dilation=1))
    norm_off = T.tanh(T.conv2d(f, *params.head, dilation=1))
    scale_map = np.empty((2, h_o, w_o))
    scale_map[0] = grid.bbox_w
    scale_map[1] = grid.bbox_h
    scaled = T.mul(norm_off, Tensor(scale_map))
    flat = T.transpose(T.reshape(scaled, (2, h_o * w_o)))
    warped = T.add(grid.base, T.scale(flat, grid.beta))
    return dsm.SamplingGrid(w_o=w_o, h_o=h_o, base=grid.base, bbox_w=grid.bbox_w,
                            bbox_h=grid.bbox_h, beta=grid.beta,
                            offsets=norm_off, warped=warped)


def _grid_sample_with_tensor(feat: Tensor, grid) -> Tensor:
    sampled = T.bilinear_sample(feat, grid.sample_points())
    return T.reshape(T.transpose(sampled), (feat.shape[0], grid.h_o, grid.w_o))


def gradcheck_composed(name: str, seed: int = 0, max_elements: int = 12) -> float:
    """Max relative error for one composed forward path."""
    inputs, forward = build_composed_case(name, seed)
    return check_gradients(inputs, forward, max_elements=max_elements,
                           rng=np.random.default_rng([seed, 0xC0]),
                           skip_kinks=True)


def gradcheck(kind: str, seed: int = 0) -> float:
    """Max relative error between analytic and numeric grads for one op."""
    inputs, forward = build_case(kind, seed)
    return check_gradients(inputs, forward)


def gradcheck_all(seeds: Sequence[int] = range(10),
                  kinds: Sequence[str] | None = None,
                  verbose: bool = False) -> float:
    """Worst relative error over the chosen op kinds and seeds."""
    worst = 0.0
    for kind in (kinds if kinds is not None else T.OP_KINDS):
        err = max(gradcheck(kind, s) for s in seeds)
        if verbose:
            status = "ok" if err < TOLERANCE else "FAIL"
            print(f"{kind:16s} {err:.3e}  {status}")
        worst = max(worst, err)
    return worst
