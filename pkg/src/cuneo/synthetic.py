"""Procedural wedge-glyph generator and page stamping.

The real cuneiform corpus is not redistributable, so desk-scale runs use
synthetic sign classes built from wedge strokes: each class is a seeded
arrangement of 2-5 elongated triangles, guaranteed connected (so a stamped
character segments as one component) and pairwise distinct.

``stamp_page`` lays masters out on a grid and returns the page together
with its ground-truth layout, which the segmentation and recognition tests
check against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import connected_components, content_bbox
from .segmentation import fit_to_square

_ORIENTATIONS = np.array([0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0])


def _fill_triangle(canvas: np.ndarray, pts: np.ndarray) -> None:
    """Rasterize a filled triangle onto a bool canvas (pixel-centre test)."""
    h, w = canvas.shape
    x0 = max(0, int(np.floor(pts[:, 0].min())))
    x1 = min(w - 1, int(np.ceil(pts[:, 0].max())))
    y0 = max(0, int(np.floor(pts[:, 1].min())))
    y1 = min(h - 1, int(np.ceil(pts[:, 1].max())))
    if x0 > x1 or y0 > y1:
        return
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    inside_pos = np.ones(xs.shape, dtype=bool)
    inside_neg = np.ones(xs.shape, dtype=bool)
    for i in range(3):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % 3]
        cross = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        inside_pos &= cross >= 0
        inside_neg &= cross <= 0
    canvas[y0 : y1 + 1, x0 : x1 + 1] |= inside_pos | inside_neg


def _draw_segment(canvas: np.ndarray, p0, p1, radius: float = 1.0) -> None:
    """Mark pixels within ``radius`` of the segment p0-p1."""
    h, w = canvas.shape
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    lo = np.maximum(0, np.floor(np.minimum(p0, p1) - radius)).astype(int)
    hi = np.minimum([w - 1, h - 1], np.ceil(np.maximum(p0, p1) + radius)).astype(int)
    xs, ys = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    d = p1 - p0
    denom = float(d @ d)
    if denom == 0:
        t = np.zeros(xs.shape)
    else:
        t = np.clip(((xs - p0[0]) * d[0] + (ys - p0[1]) * d[1]) / denom, 0.0, 1.0)
    dist2 = (xs - (p0[0] + t * d[0])) ** 2 + (ys - (p0[1] + t * d[1])) ** 2
    canvas[lo[1] : hi[1] + 1, lo[0] : hi[0] + 1] |= dist2 <= radius * radius


def _draw_wedge(canvas: np.ndarray, tip, angle_deg: float, length: float, half_width: float) -> None:
    theta = np.deg2rad(angle_deg)
    direction = np.array([np.cos(theta), np.sin(theta)])
    normal = np.array([-direction[1], direction[0]])
    tip = np.asarray(tip, dtype=np.float64)
    base = tip + direction * length
    pts = np.stack([tip, base + normal * half_width, base - normal * half_width])
    _fill_triangle(canvas, pts)


def _random_master(side: int, rng: np.random.Generator) -> np.ndarray:
    canvas = np.zeros((side, side), dtype=bool)
    n_wedges = int(rng.integers(2, 6))
    lo, hi = side * 0.2, side * 0.8
    anchor = rng.uniform(lo, hi, size=2)
    for _ in range(n_wedges):
        angle = float(rng.choice(_ORIENTATIONS)) + float(rng.uniform(-8, 8))
        length = float(rng.uniform(0.28, 0.52)) * side
        half_width = float(rng.uniform(0.05, 0.09)) * side
        before = canvas.copy()
        _draw_wedge(canvas, anchor, angle, length, half_width)
        if len(connected_components(canvas, "eight")) > 1:
            # new wedge landed detached: bridge it back to the existing ink
            centroid = anchor + np.array([np.cos(np.deg2rad(angle)), np.sin(np.deg2rad(angle))]) * length / 2
            _draw_segment(canvas, anchor, centroid, radius=max(1.0, side * 0.02))
            if len(connected_components(canvas, "eight")) > 1:
                canvas = before  # still detached (clipped at border): drop the wedge
        ys, xs = np.nonzero(canvas)
        if len(ys) > 0:
            pick = int(rng.integers(0, len(ys)))
            anchor = np.array([float(xs[pick]), float(ys[pick])])
    return canvas


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum()) / float(union)


@dataclass(frozen=True)
class SyntheticClass:
    sign_name: str
    master: np.ndarray  # bool (side, side), normalized


def wedge_glyph_catalog(num_classes: int, side: int = 64, seed: int = 0) -> list[SyntheticClass]:
    """Generate ``num_classes`` distinct, connected wedge glyph masters.

    Deterministic in (num_classes, side, seed).  Masters are normalized to
    the glyph format (longest side fitted, centred).  Classes whose ink
    overlaps an earlier class too closely (IoU > 0.6) are redrawn.
    """
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    classes: list[SyntheticClass] = []
    for idx in range(num_classes):
        for attempt in range(64):
            rng = np.random.default_rng([seed, idx, attempt])
            raw = _random_master(side, rng)
            bbox = content_bbox(raw)
            if bbox is None:
                continue
            x0, y0, x1, y1 = bbox
            master = fit_to_square(raw[y0 : y1 + 1, x0 : x1 + 1], side)
            if master.sum() < side * side * 0.02:
                continue
            if all(_iou(master, c.master) <= 0.6 for c in classes):
                classes.append(SyntheticClass(sign_name=f"syn-{idx:03d}", master=master))
                break
        else:
            raise RuntimeError(f"could not draw a distinct master for class {idx}")
    return classes


@dataclass(frozen=True)
class StampRecord:
    """Ground truth for one stamped glyph."""

    line_index: int
    column_index: int
    class_id: int
    bbox: tuple[int, int, int, int]  # ink bbox on the page, inclusive


def stamp_page(
    masters: list[np.ndarray],
    layout: list[list[int]],
    stamp_size: int = 48,
    separation: int = 12,
    margin: int = 16,
    ink: int = 0,
    background: int = 255,
) -> tuple[np.ndarray, list[StampRecord]]:
    """Stamp glyph masters onto a synthetic page in a line/column grid.

    ``layout`` is a list of lines, each a list of class indices into
    ``masters``.  Adjacent stamps are separated by at least ``separation``
    pixels of background.  Returns the grayscale page and the ground-truth
    records in reading order.
    """
    if not layout or any(len(line) == 0 for line in layout):
        raise ValueError("layout must contain at least one non-empty line")
    if separation < 1 or stamp_size < 4 or margin < 0:
        raise ValueError("bad stamping geometry")
    for line in layout:
        for class_id in line:
            if not 0 <= class_id < len(masters):
                raise ValueError(f"layout references master {class_id}, have {len(masters)}")
    rows = len(layout)
    cols = max(len(line) for line in layout)
    pitch = stamp_size + separation
    width = 2 * margin + cols * pitch - separation
    height = 2 * margin + rows * pitch - separation
    page = np.full((height, width), background, dtype=np.uint8)
    records: list[StampRecord] = []
    for li, line in enumerate(layout):
        for ci, class_id in enumerate(line):
            glyph = fit_to_square(masters[class_id], stamp_size)
            y = margin + li * pitch
            x = margin + ci * pitch
            page[y : y + stamp_size, x : x + stamp_size][glyph] = ink
            bbox = content_bbox(glyph)
            assert bbox is not None
            records.append(
                StampRecord(
                    line_index=li,
                    column_index=ci,
                    class_id=class_id,
                    bbox=(x + bbox[0], y + bbox[1], x + bbox[2], y + bbox[3]),
                )
            )
    return page, records
