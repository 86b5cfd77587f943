"""Closed-polygon operations: arc-length resampling, per-vertex geometric
attributes, and corner-based splitting into reading-order aligned control
points.

All functions are pure and work on pixel coordinates with image convention
(y grows downward); "clockwise" below means clockwise on screen, which for
this convention is a positive shoelace sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_SEGMENT = 1e-9


class GeometryError(ValueError):
    pass


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


@dataclass
class BoundaryPolygon:
    """Closed boundary of 2K vertices in pixels."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError(f"boundary points must be (n, 2), got {pts.shape}")
        n = len(pts)
        if n < 8 or n % 2 != 0:
            raise GeometryError(f"boundary needs an even vertex count >= 8, got {n}")
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if seg.min() < MIN_SEGMENT:
            raise GeometryError("consecutive duplicate boundary points")
        if abs(signed_area(pts)) == 0.0:
            raise GeometryError("boundary has zero signed area")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    @property
    def bbox_w(self) -> float:
        return float(np.ptp(self.points[:, 0]))

    @property
    def bbox_h(self) -> float:
        return float(np.ptp(self.points[:, 1]))

    def is_clockwise(self) -> bool:
        return signed_area(self.points) > 0

    def ensure_clockwise(self) -> "BoundaryPolygon":
        """Clockwise on screen, keeping vertex 0 in place."""
        if self.is_clockwise():
            return self
        return BoundaryPolygon(np.roll(self.points[::-1], 1, axis=0))


@dataclass
class GeometricAttributes:
    """Per-vertex rows [cos(theta), d, dx, dy] plus the vertex-mean centroid."""

    rows: np.ndarray
    centroid: tuple[float, float]


@dataclass
class ControlPointSet:
    """K control points, K/2 per long side, reading-order aligned.

    ``points[:K/2]`` is the top side walked along the reading direction;
    ``points[K/2:]`` is the bottom side stored in the same left-to-right
    order, so top[i] and bottom[i] pair up column-for-column.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) % 2 != 0:
            raise GeometryError(f"control points must be (K, 2) with K even, got {pts.shape}")
        self.points = pts

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def top(self) -> np.ndarray:
        return self.points[: self.k // 2]

    @property
    def bottom(self) -> np.ndarray:
        return self.points[self.k // 2:]

    def closed_contour(self) -> np.ndarray:
        """Top side followed by the reversed bottom side (a closed loop)."""
        return np.vstack([self.top, self.bottom[::-1]])


def _arc_positions(points: np.ndarray, closed: bool) -> np.ndarray:
    diffs = np.diff(points, axis=0)
    if closed:
        diffs = np.vstack([diffs, points[0] - points[-1]])
    seg = np.linalg.norm(diffs, axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _interp_along(points: np.ndarray, cum: np.ndarray, targets: np.ndarray,
                  closed: bool) -> np.ndarray:
    """Linear interpolation along a polyline at the given arc lengths."""
    loop = np.vstack([points, points[:1]]) if closed else points
    xs = np.interp(targets, cum, loop[:, 0])
    ys = np.interp(targets, cum, loop[:, 1])
    return np.stack([xs, ys], axis=1)


def resample_closed(polygon: np.ndarray, n: int) -> BoundaryPolygon:
    """Resample a closed contour to n points equally spaced by arc length.

    Point 0 stays anchored at the original first vertex; orientation is
    preserved.
    """
    pts = np.asarray(polygon, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise GeometryError(f"need at least 3 raw vertices, got {pts.shape}")
    if n < 8 or n % 2 != 0:
        raise GeometryError(f"resample count must be even and >= 8, got {n}")
    cum = _arc_positions(pts, closed=True)
    perimeter = cum[-1]
    if perimeter < MIN_SEGMENT:
        raise GeometryError("degenerate polygon: zero perimeter")
    targets = np.arange(n) * (perimeter / n)
    return BoundaryPolygon(_interp_along(pts, cum, targets, closed=True))


def resample_open(path: np.ndarray, m: int) -> np.ndarray:
    """Resample an open polyline to m equidistant points including both ends."""
    pts = np.asarray(path, dtype=np.float64)
    if len(pts) < 2:
        raise GeometryError("open path needs at least 2 points")
    if m < 2:
        raise GeometryError(f"need at least 2 resampled points, got {m}")
    cum = _arc_positions(pts, closed=False)
    if cum[-1] < MIN_SEGMENT:
        raise GeometryError("degenerate side: zero length")
    targets = np.linspace(0.0, cum[-1], m)
    return _interp_along(pts, cum, targets, closed=False)


def geometric_attributes(poly: BoundaryPolygon) -> GeometricAttributes:
    pts = poly.points
    nxt = np.roll(pts, -1, axis=0) - pts
    prv = np.roll(pts, 1, axis=0) - pts
    ln, lp = np.linalg.norm(nxt, axis=1), np.linalg.norm(prv, axis=1)
    if ln.min() < MIN_SEGMENT or lp.min() < MIN_SEGMENT:
        raise GeometryError("coincident neighbor points")
    cos_theta = np.clip((nxt * prv).sum(axis=1) / (ln * lp), -1.0, 1.0)
    centroid = pts.mean(axis=0)
    rel = pts - centroid
    dist = np.linalg.norm(rel, axis=1)
    dmax = dist.max()
    if dmax < MIN_SEGMENT:
        raise GeometryError("all vertices coincide with the centroid")
    rows = np.stack([
        cos_theta,
        dist / dmax,
        rel[:, 0] / max(poly.bbox_w, MIN_SEGMENT),
        rel[:, 1] / max(poly.bbox_h, MIN_SEGMENT),
    ], axis=1)
    return GeometricAttributes(rows=rows, centroid=(float(centroid[0]), float(centroid[1])))


def _walk(points: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Vertices from start to stop inclusive, walking forward with wraparound."""
    n = len(points)
    count = (stop - start) % n + 1
    idx = (start + np.arange(count)) % n
    return points[idx]


def split_and_resample(poly: BoundaryPolygon, corners, k: int) -> ControlPointSet:
    """Split a boundary at 4 corner vertices and resample each long side.

    ``corners`` are vertex indices (c0, c1, c2, c3) in cyclic order along
    the contour: c0->c1 is the top side (reading direction), c2->c3 the
    bottom side. Each side is resampled to k/2 equidistant points including
    both corner endpoints; the bottom side is stored reversed so it pairs
    index-for-index with the top side.
    """
    c0, c1, c2, c3 = (int(c) for c in corners)
    n = len(poly)
    if len({c0, c1, c2, c3}) != 4:
        raise GeometryError(f"corner indices must be distinct, got {corners}")
    if not all(0 <= c < n for c in (c0, c1, c2, c3)):
        raise GeometryError(f"corner index out of range for {n}-gon: {corners}")
    offs = [(c - c0) % n for c in (c1, c2, c3)]
    if not (0 < offs[0] < offs[1] < offs[2]):
        raise GeometryError(f"corners not in cyclic order along the contour: {corners}")
    if k < 4 or k % 2 != 0:
        raise GeometryError(f"control point count must be even and >= 4, got {k}")
    top = resample_open(_walk(poly.points, c0, c1), k // 2)
    bottom = resample_open(_walk(poly.points, c2, c3), k // 2)
    return ControlPointSet(np.vstack([top, bottom[::-1]]))
