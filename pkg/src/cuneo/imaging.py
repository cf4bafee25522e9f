"""Pixel-level primitives shared by dataset preprocessing and page segmentation.

Images are plain numpy arrays: grayscale rasters are 2-D ``uint8`` arrays
(row-major, intensities 0..255) and binary rasters are 2-D ``bool`` arrays
where True marks foreground ink.  All functions are pure; inputs are never
mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

INK_IS_DARK = "ink_is_dark"
INK_IS_LIGHT = "ink_is_light"

# ITU-R BT.601 luma weights, fixed for determinism.
_LUMA = (0.299, 0.587, 0.114)


def require_gray(img: np.ndarray) -> np.ndarray:
    """Validate a grayscale raster and return it as a uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"grayscale image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("grayscale image must be nonempty")
    if arr.dtype != np.uint8:
        raise ValueError(f"grayscale image must be uint8, got {arr.dtype}")
    return arr


def require_binary(img: np.ndarray) -> np.ndarray:
    """Validate a binary raster and return it as a bool array."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"binary image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("binary image must be nonempty")
    if arr.dtype != np.bool_:
        raise ValueError(f"binary image must be bool, got {arr.dtype}")
    return arr


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Convert an interleaved 8-bit RGB raster (H, W, 3) to grayscale.

    Each output pixel is round(0.299 R + 0.587 G + 0.114 B), rounded half
    up and clamped to [0, 255].  Gray pixels (v, v, v) map to v exactly,
    and an already-2-D grayscale array passes through as a copy.
    """
    arr = np.asarray(rgb)
    if arr.dtype != np.uint8:
        raise ValueError(f"image must be uint8, got {arr.dtype}")
    if arr.size == 0:
        raise ValueError("image must be nonempty")
    if arr.ndim == 2:
        return arr.copy()
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"RGB image must have shape (H, W, 3), got {arr.shape}")
    r, g, b = _LUMA
    luma = r * arr[:, :, 0] + g * arr[:, :, 1] + b * arr[:, :, 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def resize_to_width(img: np.ndarray, target_width: int) -> np.ndarray:
    """Resize a grayscale image to ``target_width``, preserving aspect ratio.

    Output height is max(1, round(h * target_width / w)).  Sampling is
    bilinear with half-pixel-centre coordinates and edge clamping,
    evaluated in exact integer arithmetic (round half up); when
    ``target_width`` equals the input width the result is pixel-identical.
    """
    arr = require_gray(img)
    if target_width < 1:
        raise ValueError(f"target_width must be >= 1, got {target_width}")
    h, w = arr.shape
    out_w = int(target_width)
    out_h = max(1, int(np.floor(h * out_w / w + 0.5)))
    if out_w == w and out_h == h:
        return arr.copy()
    return _bilinear_resize(arr, out_h, out_w)


def _bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # All arithmetic is exact: the source centre of output pixel dx is the
    # rational ((2dx+1)w - out_w) / (2 out_w), so interpolation weights are
    # integers over a common denominator and round-half-up is one integer
    # division.  Float evaluation would flip ties (v exactly k + 1/2).
    h, w = arr.shape
    den_x, den_y = 2 * out_w, 2 * out_h
    num_x = (2 * np.arange(out_w, dtype=np.int64) + 1) * w - out_w
    num_y = (2 * np.arange(out_h, dtype=np.int64) + 1) * h - out_h
    x0 = num_x // den_x
    y0 = num_y // den_y
    rx = num_x - x0 * den_x  # in [0, den_x)
    ry = num_y - y0 * den_y
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    src = arr.astype(np.int64)
    top = src[y0c][:, x0c] * (den_x - rx) + src[y0c][:, x1c] * rx
    bot = src[y1c][:, x0c] * (den_x - rx) + src[y1c][:, x1c] * rx
    num = top * (den_y - ry)[:, None] + bot * ry[:, None]
    d = den_x * den_y
    return ((2 * num + d) // (2 * d)).astype(np.uint8)


def nearest_resize_binary(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour rescale of a binary raster (used for glyph refits)."""
    arr = require_binary(img)
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    h, w = arr.shape
    yi = np.minimum(((np.arange(out_h) + 0.5) * (h / out_h)).astype(np.int64), h - 1)
    xi = np.minimum(((np.arange(out_w) + 0.5) * (w / out_w)).astype(np.int64), w - 1)
    return arr[yi][:, xi]


def otsu_threshold(img: np.ndarray, polarity: str = INK_IS_DARK) -> tuple[np.ndarray, int]:
    """Binarize by Otsu's method; returns (binary image, threshold).

    The threshold t in [0, 255] maximizes the between-class variance of the
    intensity histogram, with ties broken toward the smallest t.  Pixels
    <= t are foreground under ``ink_is_dark``; pixels > t under
    ``ink_is_light``.  The argmax is computed in exact integer arithmetic,
    so it equals an exhaustive scan bit-for-bit.

    A constant image degenerates to t = 0 (all variances are zero): an
    all-255 image under ``ink_is_dark`` therefore has empty foreground.
    """
    arr = require_gray(img)
    if polarity not in (INK_IS_DARK, INK_IS_LIGHT):
        raise ValueError(f"unknown polarity {polarity!r}")
    hist = np.bincount(arr.ravel(), minlength=256).astype(np.int64)
    n_total = int(hist.sum())
    s_total = int((hist * np.arange(256, dtype=np.int64)).sum())

    # between-class variance at t is (s0*n1 - s1*n0)^2 / (n0*n1) up to a
    # constant factor; compare candidates as exact integer fractions
    best_t = 0
    best_num = -1  # numerator of best score
    best_den = 1
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = n_total - n0
        s1 = s_total - s0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            d = s0 * n1 - s1 * n0
            num, den = d * d, n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    if polarity == INK_IS_DARK:
        fg = arr <= best_t
    else:
        fg = arr > best_t
    return fg, best_t


@dataclass(frozen=True)
class StructuringElement:
    """Dilation kernel: a rectangle or cross of given half-extents."""

    radius_x: int = 1
    radius_y: int = 1
    shape: str = "rectangle"

    def __post_init__(self):
        if self.radius_x < 0 or self.radius_y < 0:
            raise ValueError("structuring element radii must be >= 0")
        if self.shape not in ("rectangle", "cross"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")

    def footprint(self) -> np.ndarray:
        """Boolean footprint array of shape (2*radius_y+1, 2*radius_x+1)."""
        h = 2 * self.radius_y + 1
        w = 2 * self.radius_x + 1
        if self.shape == "rectangle":
            return np.ones((h, w), dtype=bool)
        fp = np.zeros((h, w), dtype=bool)
        fp[self.radius_y, :] = True
        fp[:, self.radius_x] = True
        return fp


def dilate(img: np.ndarray, se: StructuringElement, iterations: int = 1) -> np.ndarray:
    """Morphological dilation applied ``iterations`` times (0 = identity)."""
    arr = require_binary(img)
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    if iterations == 0:
        return arr.copy()
    # scipy treats iterations=0 as "repeat to convergence", hence the guard
    return ndimage.binary_dilation(arr, structure=se.footprint(), iterations=iterations)


@dataclass(frozen=True)
class Component:
    """A connected foreground region with its tight bounding box."""

    pixel_count: int
    bbox: tuple[int, int, int, int]  # (x0, y0, x1, y1), inclusive

    @property
    def width(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def height(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1


def content_bbox(img: np.ndarray) -> tuple[int, int, int, int] | None:
    """Tight bbox (x0, y0, x1, y1) of the foreground, or None if empty."""
    arr = require_binary(img)
    ys, xs = np.nonzero(arr)
    if ys.size == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


def connected_components(img: np.ndarray, connectivity: str = "eight") -> list[Component]:
    """Label foreground regions; returns components sorted by (y0, x0, size).

    Components partition the foreground exactly.  ``connectivity`` is
    "four" or "eight".
    """
    arr = require_binary(img)
    if connectivity == "four":
        structure = _STRUCTURE_4
    elif connectivity == "eight":
        structure = _STRUCTURE_8
    else:
        raise ValueError(f"unknown connectivity {connectivity!r}")
    labels, count = ndimage.label(arr, structure=structure)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    comps = []
    for i, slc in enumerate(ndimage.find_objects(labels), start=1):
        y0, y1 = slc[0].start, slc[0].stop - 1
        x0, x1 = slc[1].start, slc[1].stop - 1
        comps.append(Component(pixel_count=int(sizes[i]), bbox=(x0, y0, x1, y1)))
    comps.sort(key=lambda c: (c.bbox[1], c.bbox[0], c.pixel_count, c.bbox[2], c.bbox[3]))
    return comps
