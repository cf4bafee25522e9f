"""Page segmentation: from a scanned page to an ordered list of glyph images.

The pipeline resizes the scan to a fixed width, binarizes it, dilates the
ink so multi-stroke characters become single connected components, groups
component boxes into text lines, and crops each character back out of the
*undilated* ink, rescaled to the classifier's square input format.

Reading order is left-to-right within a line, lines top-to-bottom; the
ordering is a deterministic total order, so identical inputs and parameters
always produce identical segmentations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .imaging import (
    INK_IS_DARK,
    INK_IS_LIGHT,
    Component,
    StructuringElement,
    connected_components,
    dilate,
    nearest_resize_binary,
    otsu_threshold,
    require_binary,
    resize_to_width,
)


@dataclass(frozen=True)
class SegmentationParams:
    """Tuning knobs for page segmentation.

    The pipeline fixes only the 1000 px working width; every other
    value here is an exposed parameter with a conservative default.
    """

    target_width: int = 1000
    dilation_radius: int = 1
    dilation_iterations: int = 1
    min_component_pixels: int = 20  # noise floor, counted on undilated ink
    line_overlap_ratio: float = 0.5
    glyph_size: int = 64
    glyph_margin: float = 0.08
    polarity: str = INK_IS_DARK

    def __post_init__(self):
        if self.target_width < 1:
            raise ValueError("target_width must be >= 1")
        if self.dilation_radius < 0 or self.dilation_iterations < 0:
            raise ValueError("dilation parameters must be >= 0")
        if self.min_component_pixels < 1:
            raise ValueError("min_component_pixels must be >= 1")
        if not 0.0 < self.line_overlap_ratio <= 1.0:
            raise ValueError("line_overlap_ratio must be in (0, 1]")
        if self.glyph_size < 8:
            raise ValueError("glyph_size must be >= 8")
        if self.glyph_margin < 0:
            raise ValueError("glyph_margin must be >= 0")
        if self.polarity not in (INK_IS_DARK, INK_IS_LIGHT):
            raise ValueError(f"unknown polarity {self.polarity!r}")


@dataclass(frozen=True)
class CharBox:
    """One segmented character: tight ink bbox plus its reading-order slot."""

    bbox: tuple[int, int, int, int]  # (x0, y0, x1, y1), inclusive
    line_index: int
    column_index: int
    pixel_count: int

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if x0 > x1 or y0 > y1:
            raise ValueError(f"degenerate bbox {self.bbox}")
        if self.line_index < 0 or self.column_index < 0:
            raise ValueError("line/column indices must be >= 0")


@dataclass(frozen=True)
class PageSegmentation:
    """Recovered layout of a page, in reading order."""

    source_size: tuple[int, int]  # (width, height) of the resized page
    boxes: tuple[CharBox, ...]
    params_used: SegmentationParams = field(default_factory=SegmentationParams)

    @property
    def num_lines(self) -> int:
        return 0 if not self.boxes else max(b.line_index for b in self.boxes) + 1


def group_into_lines(
    components: list[Component], line_overlap_ratio: float = 0.5
) -> list[list[Component]]:
    """Group component boxes into text lines by vertical-overlap closure.

    Two components share a line iff their vertical extents overlap by at
    least ``line_overlap_ratio`` times the smaller of their heights; the
    relation is closed transitively.  Lines are ordered by mean centre y,
    components within a line by x0 ascending.
    """
    if not 0.0 < line_overlap_ratio <= 1.0:
        raise ValueError("line_overlap_ratio must be in (0, 1]")
    n = len(components)
    if n == 0:
        return []
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        yi0, yi1 = components[i].bbox[1], components[i].bbox[3]
        hi = yi1 - yi0 + 1
        for j in range(i + 1, n):
            yj0, yj1 = components[j].bbox[1], components[j].bbox[3]
            hj = yj1 - yj0 + 1
            overlap = min(yi1, yj1) - max(yi0, yj0) + 1
            if overlap >= line_overlap_ratio * min(hi, hj):
                parent[find(i)] = find(j)

    groups: dict[int, list[Component]] = {}
    for i, comp in enumerate(components):
        groups.setdefault(find(i), []).append(comp)

    def mean_center_y(group: list[Component]) -> float:
        return float(np.mean([(c.bbox[1] + c.bbox[3]) / 2 for c in group]))

    lines = sorted(groups.values(), key=mean_center_y)
    for line in lines:
        line.sort(key=lambda c: (c.bbox[0], c.bbox[1], c.pixel_count))
    return lines


def extract_glyph(page: np.ndarray, box: CharBox, params: SegmentationParams) -> np.ndarray:
    """Crop one character from a binary page and refit it to glyph format.

    The bbox is expanded by ``glyph_margin`` on each side (clamped to the
    page), rescaled with nearest-neighbour sampling so its longest side
    fills ``glyph_size``, and centred on a square background canvas.
    """
    arr = require_binary(page)
    h, w = arr.shape
    x0, y0, x1, y1 = box.bbox
    if x0 < 0 or y0 < 0 or x1 >= w or y1 >= h:
        raise ValueError(f"box {box.bbox} outside page bounds {w}x{h}")
    pad_x = int(np.floor(params.glyph_margin * (x1 - x0 + 1) + 0.5))
    pad_y = int(np.floor(params.glyph_margin * (y1 - y0 + 1) + 0.5))
    cx0 = max(0, x0 - pad_x)
    cy0 = max(0, y0 - pad_y)
    cx1 = min(w - 1, x1 + pad_x)
    cy1 = min(h - 1, y1 + pad_y)
    crop = arr[cy0 : cy1 + 1, cx0 : cx1 + 1]
    return fit_to_square(crop, params.glyph_size)


def fit_to_square(crop: np.ndarray, side: int) -> np.ndarray:
    """Scale a binary crop so its longest side equals ``side`` and centre it."""
    crop = require_binary(crop)
    ch, cw = crop.shape
    scale = side / max(ch, cw)
    out_h = min(side, max(1, int(np.floor(ch * scale + 0.5))))
    out_w = min(side, max(1, int(np.floor(cw * scale + 0.5))))
    scaled = nearest_resize_binary(crop, out_h, out_w)
    glyph = np.zeros((side, side), dtype=bool)
    oy = (side - out_h) // 2
    ox = (side - out_w) // 2
    glyph[oy : oy + out_h, ox : ox + out_w] = scaled
    return glyph


def segment_page(
    scan: np.ndarray, params: SegmentationParams | None = None
) -> tuple[PageSegmentation, list[np.ndarray]]:
    """Segment a grayscale page scan into ordered, normalized glyph images.

    Pipeline: resize to ``target_width`` -> Otsu threshold -> dilate ->
    connected components -> noise filter -> line grouping -> per-character
    crop.  Dilation only merges wedge strokes for box discovery; boxes are
    tightened to the undilated ink and glyphs are cropped from the
    undilated binary image, so stroke weight is not distorted.
    """
    if params is None:
        params = SegmentationParams()
    resized = resize_to_width(scan, params.target_width)
    binary, _ = otsu_threshold(resized, params.polarity)
    se = StructuringElement(params.dilation_radius, params.dilation_radius, "rectangle")
    merged = dilate(binary, se, params.dilation_iterations)
    candidates = connected_components(merged, "eight")

    kept: list[Component] = []
    for comp in candidates:
        x0, y0, x1, y1 = comp.bbox
        region = binary[y0 : y1 + 1, x0 : x1 + 1]
        ink = int(region.sum())
        if ink < params.min_component_pixels:
            continue
        ys, xs = np.nonzero(region)
        tight = (x0 + int(xs.min()), y0 + int(ys.min()), x0 + int(xs.max()), y0 + int(ys.max()))
        kept.append(Component(pixel_count=ink, bbox=tight))

    boxes: list[CharBox] = []
    for li, line in enumerate(group_into_lines(kept, params.line_overlap_ratio)):
        for ci, comp in enumerate(line):
            boxes.append(
                CharBox(
                    bbox=comp.bbox,
                    line_index=li,
                    column_index=ci,
                    pixel_count=comp.pixel_count,
                )
            )
    h, w = resized.shape
    seg = PageSegmentation(source_size=(w, h), boxes=tuple(boxes), params_used=params)
    glyphs = [extract_glyph(binary, box, params) for box in boxes]
    return seg, glyphs


def write_manifest(path: str | os.PathLike, seg: PageSegmentation,
                   glyph_paths: list[str] | None = None) -> None:
    """Write the per-glyph segmentation manifest as TSV (glyph paths optional)."""
    if glyph_paths is None:
        glyph_paths = [""] * len(seg.boxes)
    if len(glyph_paths) != len(seg.boxes):
        raise ValueError("one glyph path required per box")
    lines = ["line_index\tcolumn_index\tx0\ty0\tx1\ty1\tpixel_count\tglyph_path"]
    for box, gpath in zip(seg.boxes, glyph_paths):
        x0, y0, x1, y1 = box.bbox
        lines.append(
            f"{box.line_index}\t{box.column_index}\t{x0}\t{y0}\t{x1}\t{y1}\t{box.pixel_count}\t{gpath}"
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def overlay_boxes(
    gray_page: np.ndarray,
    boxes: list[CharBox] | tuple[CharBox, ...],
    colors: list[tuple[int, int, int]] | None = None,
    thickness: int = 2,
) -> np.ndarray:
    """Render box outlines over a grayscale page; returns an RGB array."""
    page = np.asarray(gray_page)
    rgb = np.stack([page] * 3, axis=2).astype(np.uint8)
    h, w = page.shape
    for i, box in enumerate(boxes):
        color = np.array(colors[i] if colors else (255, 0, 0), dtype=np.uint8)
        x0, y0, x1, y1 = box.bbox
        for t in range(thickness):
            ty0, ty1 = max(0, y0 - t), min(h - 1, y1 + t)
            tx0, tx1 = max(0, x0 - t), min(w - 1, x1 + t)
            rgb[ty0, tx0 : tx1 + 1] = color
            rgb[ty1, tx0 : tx1 + 1] = color
            rgb[ty0 : ty1 + 1, tx0] = color
            rgb[ty0 : ty1 + 1, tx1] = color
    return rgb
