"""SVG rendering of one sample: image backdrop, boundaries per refinement
iteration, color-coded corners, and the base/warped sampling grids."""

from __future__ import annotations

import base64
import io
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from PIL import Image

from .geometry import BoundaryPolygon
from .pipeline import InferenceResult
from .synth import SyntheticSample

CORNER_COLORS = ("#f0d000", "#00a000", "#2060ff", "#9030c0")  # classes 0..3
ITERATION_COLORS = ("#ff8000", "#ff5030", "#e00080", "#b000ff", "#8000ff", "#600060")


def _image_data_uri(image: np.ndarray) -> str:
    img = Image.fromarray((np.clip(image, 0, 1) * 255).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def _polyline(points: np.ndarray, color: str, width: float, closed: bool = True,
              dash: str | None = None) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    tag = "polygon" if closed else "polyline"
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<{tag} points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{dash_attr}/>')


def _grid_dots(points: np.ndarray, color: str, r: float) -> str:
    return "".join(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{color}"/>'
                   for x, y in points)


def render(sample: SyntheticSample, prediction: InferenceResult | None,
           out_svg: str | Path, boundary: BoundaryPolygon | None = None,
           grids: tuple[np.ndarray, np.ndarray] | None = None) -> None:
    """Write a layered SVG; with no prediction only backdrop + ground truth."""
    h, w = sample.image.shape
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * 3}" height="{h * 3}" '
        f'viewBox="0 0 {w} {h + 14}">',
        f'<image href="{_image_data_uri(sample.image)}" x="0" y="0" '
        f'width="{w}" height="{h}"/>',
        _polyline(sample.gt_boundary.points, "#00c000", 0.8),
    ]
    caption = f"gt: {sample.text}"
    if boundary is not None:
        parts.append(_polyline(boundary.points, "#00c0c0", 0.5, dash="2,2"))
    if prediction is not None:
        for i, pts in enumerate(prediction.boundary_history):
            k = len(pts) // 2
            loop = np.vstack([pts[:k], pts[k:][::-1]])
            color = ITERATION_COLORS[min(i, len(ITERATION_COLORS) - 1)]
            parts.append(_polyline(loop, color, 0.6))
        if boundary is not None:
            for cls, idx in enumerate(prediction.corners):
                x, y = boundary.points[idx]
                parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.2" '
                             f'fill="{CORNER_COLORS[cls]}" stroke="black" '
                             f'stroke-width="0.4"/>')
        if grids is not None:
            base, warped = grids
            parts.append(_grid_dots(base[::4], "#4080ff", 0.45))
            parts.append(_grid_dots(warped[::4], "#ff4040", 0.45))
        caption += f" | decoded: {prediction.decoded or '(empty)'}"
        if prediction.low_confidence:
            caption += " [low confidence]"
    parts.append(f'<text x="2" y="{h + 10}" font-size="8" font-family="monospace" '
                 f'fill="black">{escape(caption)}</text>')
    parts.append("</svg>")
    Path(out_svg).write_text("\n".join(parts) + "\n")
