"""Synthetic corpus generator.

Each sample is a ribbon of 5x7 glyphs swept along a line, arc, or sine
curve, rotated anywhere in (-180, 180] degrees, with ground-truth boundary,
corner labels, control points, and per-column character labels. Feature
rasters are deterministic filter banks of the rendered image, so they are
reproducible and constant with respect to training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage
from shapely.geometry import Polygon as ShapelyPolygon

from .embedding import FeatureMap
from .font import GLYPH_COLS, GLYPH_ROWS, glyph_bitmap
from .geometry import BoundaryPolygon, ControlPointSet, GeometryError, split_and_resample
from .recognizer import ALPHABET, BLANK

RAST_MAGIC = b"IASTRAST"
CANVAS = 160
CELLS_PER_ADVANCE = 7  # 5 glyph columns plus one spacing cell each side
DETECTION_SIGMAS = (1.0, 2.0, 4.0, 8.0)
ROTATION_ANCHORS = tuple(range(-180, 181, 30))

# recognition bank geometry: nominal glyph cell in pixels and the dash
# heights (in cells above the baseline) that the band channels resolve
NOMINAL_GLYPH_HEIGHT = 19.2
NOMINAL_CELL = NOMINAL_GLYPH_HEIGHT / 8.0  # GLYPH_ROWS
BAND_HEIGHTS = (2, 3, 4, 5, 6, 7)
BAND_SIGMA = 0.55           # band softness, in cells
BAND_SMOOTHINGS = (1.5, 3.0, 6.0)  # along-image blur of band channels, px
BASELINE_BLUR = 0.8
BASELINE_THRESHOLD = 0.35
BASELINE_MIN_EXTENT = 25    # px; dash blobs stay < ~13, baselines reach > 30

# fixed per-channel standardization of the recognition bank, estimated once
# on a reference batch of default-config instances; keeps the recognizer's
# inputs well-conditioned without any per-image statistics
RECOGNITION_MEAN = np.array([
    0.02368, 0.02583, 0.02384, 0.02129, 0.01781, 0.00778, 0.02368, 0.02581,
    0.02389, 0.02131, 0.01779, 0.00784, 0.02365, 0.02582, 0.02390, 0.02133,
    0.01782, 0.00784, 0.02244, 0.02505, 0.02324, 0.02048, 0.01656, 0.00696,
    0.22308, 0.21540, 0.18780, 0.15030, 0.14415, 0.12442, 0.12446, 0.31144,
])
RECOGNITION_STD = np.array([
    0.03069, 0.03174, 0.03116, 0.03013, 0.02812, 0.01600, 0.02728, 0.02795,
    0.02768, 0.02692, 0.02523, 0.01456, 0.02149, 0.02153, 0.02175, 0.02157,
    0.02059, 0.01218, 0.01367, 0.01311, 0.01397, 0.01432, 0.01367, 0.00813,
    0.11712, 0.09711, 0.04320, 0.02931, 0.05966, 0.04483, 0.04931, 0.05543,
])


class DatasetError(IOError):
    pass


@dataclass
class GenConfig:
    seed: int = 0
    canvas: int = CANVAS
    k: int = 16                  # control points; the boundary carries 2K vertices
    grid_w: int = 64
    grid_h: int = 16
    curve_families: tuple[str, ...] = ("line", "arc", "sine")
    anchor_prob: float = 0.5     # chance of snapping rotation near a 30-degree anchor
    glyph_height_range: tuple[float, float] = (NOMINAL_GLYPH_HEIGHT,
                                               NOMINAL_GLYPH_HEIGHT)
    text_length_range: tuple[int, int] = (3, 7)
    noise: float = 0.1           # boundary oracle jitter, fraction of half-width
    margin: float = 6.0

    @classmethod
    def from_file(cls, path: str | Path) -> "GenConfig":
        """Plain key=value config; unknown keys are rejected."""
        cfg = cls()
        fields = {f: type(getattr(cfg, f)) for f in cfg.__dataclass_fields__}
        updates = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DatasetError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in fields:
                raise DatasetError(f"{path}:{lineno}: unknown config key {key!r}")
            kind = fields[key]
            if kind is tuple:
                parts = [p.strip() for p in value.split(",") if p.strip()]
                current = getattr(cfg, key)
                elem = type(current[0])
                updates[key] = tuple(elem(p) for p in parts)
            elif kind is int:
                updates[key] = int(value)
            elif kind is float:
                updates[key] = float(value)
            else:
                updates[key] = value
        return replace(cfg, **updates)


@dataclass
class SyntheticSample:
    sample_id: int
    image: np.ndarray            # (H, W) grayscale in [0, 1]
    text: str
    rotation_deg: float
    gt_boundary: BoundaryPolygon
    corner_indices: tuple[int, int, int, int]
    gt_controls: ControlPointSet
    col_labels: np.ndarray       # (grid_w,) ints, blank-padded alignment

    def corner_onehot(self) -> np.ndarray:
        y = np.zeros((4, len(self.gt_boundary)))
        for cls, idx in enumerate(self.corner_indices):
            y[cls, idx] = 1.0
        return y


# ---------------------------------------------------------------------------
# curve construction


def _centerline(family: str, total_len: float, rng: np.random.Generator,
                samples: int = 400) -> np.ndarray:
    """Dense canonical centerline of roughly the requested arc length."""
    u = np.linspace(0.0, 1.0, samples)
    if family == "line":
        pts = np.stack([u * total_len, np.zeros_like(u)], axis=1)
    elif family == "arc":
        sweep = rng.uniform(0.4, 1.3) * rng.choice([-1.0, 1.0])
        radius = total_len / abs(sweep)
        ang = u * abs(sweep)
        # initial tangent along +x for either bend direction, so the
        # stated rotation always describes the text orientation
        pts = np.stack([radius * np.sin(ang),
                        np.sign(sweep) * radius * (1.0 - np.cos(ang))], axis=1)
    elif family == "sine":
        amp = rng.uniform(0.06, 0.14) * total_len
        freq = rng.uniform(0.5, 1.0)
        x = u * total_len
        pts = np.stack([x, amp * np.sin(2 * np.pi * freq * u)], axis=1)
    else:
        raise DatasetError(f"unknown curve family {family!r}")
    return pts - pts.mean(axis=0)


class _ArcCurve:
    """Arc-length lookup over a dense polyline: position and frame at s."""

    def __init__(self, pts: np.ndarray):
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.pts = pts
        self.length = float(self.cum[-1])

    def at(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (point, unit tangent, glyph-down normal) at arc length s."""
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        x = np.interp(s, self.cum, self.pts[:, 0])
        y = np.interp(s, self.cum, self.pts[:, 1])
        h = max(self.length * 1e-3, 1e-6)
        xt = np.interp(np.clip(s + h, 0, self.length), self.cum, self.pts[:, 0]) \
            - np.interp(np.clip(s - h, 0, self.length), self.cum, self.pts[:, 0])
        yt = np.interp(np.clip(s + h, 0, self.length), self.cum, self.pts[:, 1]) \
            - np.interp(np.clip(s - h, 0, self.length), self.cum, self.pts[:, 1])
        t = np.stack([xt, yt], axis=-1)
        t /= np.linalg.norm(t, axis=-1, keepdims=True)
        n = np.stack([-t[..., 1], t[..., 0]], axis=-1)  # +90 deg: glyph-down
        return np.stack([x, y], axis=-1), t, n


def _rotate(pts: np.ndarray, deg: float) -> np.ndarray:
    a = np.deg2rad(deg)
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    return pts @ rot.T


def _draw_rotation(rng: np.random.Generator, anchor_prob: float) -> float:
    """Wide-angle rotation with denser sampling around 30-degree anchors."""
    if rng.uniform() < anchor_prob:
        theta = float(rng.choice(ROTATION_ANCHORS)) + float(rng.normal(0.0, 3.0))
    else:
        theta = float(rng.uniform(-180.0, 180.0))
    return ((theta + 180.0) % 360.0) - 180.0


# ---------------------------------------------------------------------------
# rendering


VERTICAL_SHIFT_CELLS = 1.0  # glyphs sit low in the ribbon: wide top margin


def _stamp_text(image: np.ndarray, curve: _ArcCurve, text: str, cell: float) -> None:
    """Splat glyph bitmaps along the curve with bilinear footprints.

    Glyphs are shifted toward the ribbon's bottom edge and underlined by a
    continuous baseline bar. Both make the two long sides of the boundary
    visually distinct, which is what reading-order estimation learns from.
    """
    h, w = image.shape
    advance = CELLS_PER_ADVANCE * cell
    subs = 3
    offsets = (np.arange(subs) + 0.5) / subs
    pts_all = []
    for k, ch in enumerate(text):
        bm = glyph_bitmap(ch)
        rows, cols = np.nonzero(bm)
        if len(rows) == 0:
            continue
        s0 = k * advance
        # glyph columns sit in cells 1..5 of the 7-cell advance
        su = s0 + (1.0 + cols[:, None] + offsets[None, :]) * cell  # (m, subs)
        dy = (rows[:, None] - GLYPH_ROWS / 2.0 + VERTICAL_SHIFT_CELLS
              + offsets[None, :]) * cell
        su = np.repeat(su[:, :, None], subs, axis=2).reshape(-1)
        dy = np.repeat(dy[:, None, :], subs, axis=1).reshape(-1)
        p, _, n = curve.at(su)
        pts_all.append(p + n * dy[:, None])
    # continuous underline at the baseline row spanning the whole ribbon;
    # this is the top/bottom asymmetry cue for reading-order estimation
    total = len(text) * advance
    su = np.arange(0.0, total, cell / subs)
    dy_base = (GLYPH_ROWS - 1 - GLYPH_ROWS / 2.0 + VERTICAL_SHIFT_CELLS + 0.5) * cell
    p, _, n = curve.at(su)
    for frac in offsets:
        pts_all.append(p + n * (dy_base + (frac - 0.5) * cell))
    if not pts_all:
        return
    pts = np.vstack(pts_all)
    weight = 1.8 / (subs * subs) * cell * cell  # approx. unit coverage per cell
    x0 = np.floor(pts[:, 0]).astype(int)
    y0 = np.floor(pts[:, 1]).astype(int)
    fx = pts[:, 0] - x0
    fy = pts[:, 1] - y0
    ok = (x0 >= 0) & (x0 < w - 1) & (y0 >= 0) & (y0 < h - 1)
    x0, y0, fx, fy = x0[ok], y0[ok], fx[ok], fy[ok]
    np.add.at(image, (y0, x0), weight * (1 - fx) * (1 - fy))
    np.add.at(image, (y0, x0 + 1), weight * fx * (1 - fy))
    np.add.at(image, (y0 + 1, x0), weight * (1 - fx) * fy)
    np.add.at(image, (y0 + 1, x0 + 1), weight * fx * fy)


# ---------------------------------------------------------------------------
# instance generation


def gen_instance(cfg: GenConfig, seed: int,
                 rotation_override: float | None = None) -> SyntheticSample:
    """Deterministically generate one text instance from (cfg.seed, seed)."""
    rng_text = np.random.default_rng([cfg.seed, seed, 3])
    rng_rot = np.random.default_rng([cfg.seed, seed, 7])
    lo, hi = cfg.text_length_range
    n_chars = int(rng_text.integers(lo, hi + 1))
    text = "".join(ALPHABET[i] for i in rng_text.integers(0, len(ALPHABET), n_chars))
    if rotation_override is not None:
        rotation = float(rotation_override)
        _draw_rotation(rng_rot, cfg.anchor_prob)  # keep rng stream aligned
    else:
        rotation = _draw_rotation(rng_rot, cfg.anchor_prob)

    center = np.array([cfg.canvas / 2.0, cfg.canvas / 2.0])
    shrink = 1.0
    last_err = None
    for attempt in range(10):
        rng_geo = np.random.default_rng([cfg.seed, seed, 1, attempt])
        gh = rng_geo.uniform(*cfg.glyph_height_range) * shrink
        cell = gh / GLYPH_ROWS
        half_width = 5.5 * cell
        total_len = n_chars * CELLS_PER_ADVANCE * cell
        family = str(rng_geo.choice(cfg.curve_families))
        dense = _centerline(family, total_len, rng_geo)
        dense = _rotate(dense, rotation) + center
        curve = _ArcCurve(dense)

        k2 = cfg.k  # vertices per long side; boundary has 2K total
        s_side = np.linspace(0.0, curve.length, k2)
        p, _, n = curve.at(s_side)
        top = p - half_width * n
        bottom = p + half_width * n
        boundary_pts = np.vstack([top, bottom[::-1]])
        lo_ext = boundary_pts.min()
        hi_ext = boundary_pts.max()
        if lo_ext < cfg.margin or hi_ext > cfg.canvas - cfg.margin:
            shrink *= 0.85
            last_err = "ribbon leaves the canvas"
            continue
        try:
            boundary = BoundaryPolygon(boundary_pts)
        except GeometryError as e:
            last_err = str(e)
            continue
        image = np.zeros((cfg.canvas, cfg.canvas))
        _stamp_text(image, curve, text, cell)
        np.clip(image, 0.0, 1.0, out=image)

        corners = (0, k2 - 1, k2, 2 * k2 - 1)
        controls = split_and_resample(boundary, corners, cfg.k)
        col_labels = _column_labels(text, cfg.grid_w)
        return SyntheticSample(sample_id=seed, image=image, text=text,
                               rotation_deg=rotation, gt_boundary=boundary,
                               corner_indices=corners, gt_controls=controls,
                               col_labels=col_labels)
    raise DatasetError(f"sample {seed}: could not fit instance after 10 tries "
                       f"({last_err})")


def _column_labels(text: str, w_o: int) -> np.ndarray:
    """Blank-padded per-column labels aligned with the canonical grid."""
    labels = np.full(w_o, BLANK, dtype=np.intp)
    n = len(text)
    u = (np.arange(w_o) + 0.5) / w_o
    pos = u * n
    cells = np.minimum(pos.astype(int), n - 1)
    frac = pos - cells
    # only the columns over a glyph's inked interior columns carry its label;
    # edge columns and inter-glyph spacing stay blank so transitions decode
    # cleanly under repeat-collapsing
    ink = (frac >= 2.2 / CELLS_PER_ADVANCE) & (frac <= 4.8 / CELLS_PER_ADVANCE)
    for i in np.nonzero(ink)[0]:
        labels[i] = ALPHABET.index(text[cells[i]])
    return labels


def perturb_boundary(gt: BoundaryPolygon, noise: float,
                     seed: int | np.random.Generator) -> tuple[BoundaryPolygon, int]:
    """Noisy-oracle initial boundary: radial jitter plus a random start index.

    Returns the perturbed polygon and the start shift s, with
    new_index = (old_index - s) mod 2K for any vertex-aligned label.
    """
    if not 0.0 <= noise <= 0.3:
        raise ValueError(f"noise must be in [0, 0.3], got {noise}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = gt.points
    n = len(pts)
    pair = n - 1 - np.arange(n)  # top vertex k faces bottom vertex 2K-1-k
    half_width = 0.5 * np.linalg.norm(pts - pts[pair], axis=1)
    centroid = pts.mean(axis=0)
    radial = pts - centroid
    radial /= np.maximum(np.linalg.norm(radial, axis=1, keepdims=True), 1e-9)
    level = noise
    for _ in range(6):
        jitter = rng.normal(0.0, 1.0, n) * level * half_width
        cand = pts + radial * jitter[:, None]
        if _is_simple(cand):
            try:
                poly = BoundaryPolygon(cand)
            except GeometryError:
                level *= 0.5
                continue
            shift = int(rng.integers(0, n))
            return BoundaryPolygon(np.roll(poly.points, -shift, axis=0)), shift
        level *= 0.5
    shift = int(rng.integers(0, n))
    return BoundaryPolygon(np.roll(pts, -shift, axis=0)), shift


def _is_simple(pts: np.ndarray) -> bool:
    try:
        return ShapelyPolygon(pts).is_valid
    except Exception:
        return False


# ---------------------------------------------------------------------------
# deterministic feature rasters


def filter_bank(image: np.ndarray, sigmas) -> np.ndarray:
    """8 channels per scale: blur, gx, gy, magnitude, signed-gradient halves."""
    chans = []
    for s in sigmas:
        g = ndimage.gaussian_filter(image, s)
        gy, gx = np.gradient(g)  # central differences of the blurred image
        mag = np.hypot(gx, gy)
        chans.extend([g, gx, gy, mag,
                      np.maximum(gx, 0), np.maximum(-gx, 0),
                      np.maximum(gy, 0), np.maximum(-gy, 0)])
    return np.stack(chans)


def detection_features(image: np.ndarray) -> FeatureMap:
    return FeatureMap(filter_bank(image, DETECTION_SIGMAS), "detection_shared")


def baseline_mask(image: np.ndarray) -> np.ndarray:
    """Ink components with a large spatial extent: the baseline bar.

    Dash blobs span at most a few glyph cells (~13 px with blur), while the
    continuous baseline runs the full ribbon length, so a bounding-box
    extent threshold separates them at any rotation or curvature.
    """
    mask = ndimage.gaussian_filter(image, BASELINE_BLUR) > BASELINE_THRESHOLD
    labeled, n = ndimage.label(mask)
    out = np.zeros_like(mask)
    for i, sl in enumerate(ndimage.find_objects(labeled), 1):
        if sl is None:
            continue
        extent = max(sl[0].stop - sl[0].start, sl[1].stop - sl[1].start)
        if extent > BASELINE_MIN_EXTENT:
            out[sl][labeled[sl] == i] = True
    return out


def recognition_features(image: np.ndarray) -> FeatureMap:
    """32 channels: baseline-anchored height bands plus raw-ink statistics.

    The distance to the detected baseline, in glyph cells, gives every
    pixel a rotation-invariant height coordinate. Ink is split into soft
    bands at the six dash heights, each at several along-image smoothing
    scales, so a single column's height-averaged features still identify
    which dash rows are present.
    """
    blurred = ndimage.gaussian_filter(image, BASELINE_BLUR)
    base = baseline_mask(image)
    if base.any():
        height = ndimage.distance_transform_edt(~base) / NOMINAL_CELL
    else:
        height = np.full(image.shape, 50.0)
    bands = [blurred * np.exp(-0.5 * ((height - k) / BAND_SIGMA) ** 2)
             for k in BAND_HEIGHTS]

    def blur(a, s):  # short-tailed blur: band channels tolerate the cutoff
        return ndimage.gaussian_filter(a, s, truncate=2.0)

    chans = list(bands)
    for s in BAND_SMOOTHINGS:
        chans.extend(blur(b, s) for b in bands)
    chans.extend([
        blurred,
        blur(image, 2.0),
        blur(image, 5.0),
        blur(image, 10.0),
        base.astype(np.float64),
        blur(base.astype(np.float64), 3.0),
        np.hypot(*np.gradient(blurred)),
        np.clip(height, 0.0, 12.0) / 12.0,
    ])
    stacked = (np.stack(chans) - RECOGNITION_MEAN[:, None, None]) \
        / RECOGNITION_STD[:, None, None]
    return FeatureMap(stacked, "recognition_shared")


PRIOR_RANGE = 8.0  # px; clip radius of the prior distance / direction fields


def prior_features(shape: tuple[int, int], boundary: BoundaryPolygon) -> FeatureMap:
    """Text mask, normalized signed distance, and boundary direction field.

    The direction field holds, at every pixel, the clipped displacement to
    the nearest boundary pixel (zero on the boundary itself), so boundary
    refinement can read the correction it needs directly instead of
    reconstructing it from a unit field and a separate magnitude.
    """
    h, w = shape
    img = Image.new("F", (w, h), 0.0)
    ImageDraw.Draw(img).polygon([tuple(p) for p in boundary.points], fill=1.0)
    mask = np.asarray(img, dtype=np.float64)
    inside = ndimage.distance_transform_edt(mask)
    outside = ndimage.distance_transform_edt(1.0 - mask)
    sdist = np.clip(inside - outside, -PRIOR_RANGE, PRIOR_RANGE) / PRIOR_RANGE
    edge = mask.astype(bool) ^ ndimage.binary_erosion(mask.astype(bool))
    if edge.any():
        _, (iy, ix) = ndimage.distance_transform_edt(~edge, return_indices=True)
        yy, xx = np.mgrid[0:h, 0:w]
        disp = np.stack([ix - xx, iy - yy]).astype(np.float64)
        disp = np.clip(disp, -PRIOR_RANGE, PRIOR_RANGE) / PRIOR_RANGE
    else:
        disp = np.zeros((2, h, w))
    return FeatureMap(np.stack([mask, sdist, disp[0], disp[1]]), "prior")


# ---------------------------------------------------------------------------
# dataset files


def write_rast(path: str | Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    with open(path, "wb") as f:
        f.write(RAST_MAGIC)
        f.write(np.array([arr.ndim], dtype="<u4").tobytes())
        f.write(np.array(arr.shape, dtype="<u8").tobytes())
        f.write(arr.astype("<f8").tobytes())


def read_rast(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != RAST_MAGIC:
        raise DatasetError(f"{path}: bad raster magic {blob[:8]!r}")
    ndim = int(np.frombuffer(blob[8:12], dtype="<u4")[0])
    dims = np.frombuffer(blob[12:12 + 8 * ndim], dtype="<u8").astype(int)
    payload = blob[12 + 8 * ndim:]
    count = int(np.prod(dims))
    if len(payload) != count * 8:
        raise DatasetError(f"{path}: payload size {len(payload)} does not match "
                           f"dims {tuple(dims)}")
    return np.frombuffer(payload, dtype="<f8").reshape(tuple(dims)).copy()


def build_dataset(cfg: GenConfig, n: int, out_dir: str | Path) -> Path:
    """Write manifest.jsonl plus one raster blob per sample; returns the dir."""
    out = Path(out_dir)
    blobs = out / "blobs"
    try:
        blobs.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"cannot create dataset dir {out}: {e}") from None
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as f:
        for i in range(n):
            sample = gen_instance(cfg, i)
            blob_rel = f"blobs/{i:05d}.rast"
            write_rast(out / blob_rel, sample.image)
            record = {
                "id": i,
                "text": sample.text,
                "rotation_deg": sample.rotation_deg,
                "boundary": sample.gt_boundary.points.tolist(),
                "corner_indices": list(sample.corner_indices),
                "controls": sample.gt_controls.points.tolist(),
                "col_labels": sample.col_labels.tolist(),
                "blob": blob_rel,
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")
    cfg_path = out / "gen_config.json"
    cfg_path.write_text(json.dumps(cfg.__dict__, sort_keys=True, default=list) + "\n")
    return out


def load_manifest(data_dir: str | Path) -> list[dict]:
    path = Path(data_dir) / "manifest.jsonl"
    if not path.exists():
        raise DatasetError(f"no manifest at {path}")
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise DatasetError(f"{path}:{lineno}: corrupt manifest line: {e}") from None
    return records


def load_sample(data_dir: str | Path, record: dict) -> SyntheticSample:
    try:
        image = read_rast(Path(data_dir) / record["blob"])
    except DatasetError as e:
        raise DatasetError(f"sample {record.get('id')}: {e}") from None
    boundary = BoundaryPolygon(np.array(record["boundary"]))
    return SyntheticSample(
        sample_id=int(record["id"]),
        image=image,
        text=record["text"],
        rotation_deg=float(record["rotation_deg"]),
        gt_boundary=boundary,
        corner_indices=tuple(record["corner_indices"]),
        gt_controls=ControlPointSet(np.array(record["controls"])),
        col_labels=np.array(record["col_labels"], dtype=np.intp),
    )
