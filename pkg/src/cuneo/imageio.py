"""Reading and writing scan images.

Binary PGM (P5) and PPM (P6) are implemented natively; PNG decoding is
delegated to Pillow.  Grayscale output is written as P5, color output
(annotated overlays) as P6.  Binary glyph rasters are stored as PGM with
ink = 0 and background = 255.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .errors import FormatError
from .imaging import require_binary, require_gray, to_grayscale

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def write_pgm(path: str | os.PathLike, gray: np.ndarray) -> None:
    """Write a grayscale raster as binary PGM (P5, maxval 255)."""
    arr = require_gray(gray)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def write_ppm(path: str | os.PathLike, rgb: np.ndarray) -> None:
    """Write an RGB raster (H, W, 3) as binary PPM (P6, maxval 255)."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8 or arr.size == 0:
        raise ValueError(f"PPM payload must be a nonempty uint8 (H, W, 3) array, got {arr.shape} {arr.dtype}")
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def _read_pnm_tokens(data: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ASCII integers, skipping # comments."""
    tokens: list[int] = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PNM header")
        try:
            tokens.append(int(data[i:j]))
        except ValueError as exc:
            raise FormatError(f"bad PNM header token {data[i:j]!r}") from exc
        i = j
    return tokens, i


def read_pnm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file.

    Returns a uint8 array: (H, W) for PGM, (H, W, 3) for PPM.  Files with
    maxval < 255 are rescaled to the full 0..255 range.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == b"P5":
        channels = 1
    elif data[:2] == b"P6":
        channels = 3
    else:
        raise FormatError(f"not a binary PGM/PPM file: {os.fspath(path)}")
    (w, h, maxval), i = _read_pnm_tokens(data, 3, 2)
    if w < 1 or h < 1:
        raise FormatError(f"bad PNM dimensions {w}x{h}")
    if not 1 <= maxval <= 255:
        raise FormatError(f"unsupported PNM maxval {maxval} (only 8-bit supported)")
    i += 1  # single whitespace byte after maxval
    need = w * h * channels
    raster = data[i : i + need]
    if len(raster) != need:
        raise FormatError(f"PNM raster truncated: expected {need} bytes, got {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    arr = arr.reshape((h, w) if channels == 1 else (h, w, 3))
    if maxval != 255:
        arr = np.floor(arr.astype(np.float64) * (255.0 / maxval) + 0.5).astype(np.uint8)
    return arr.copy()


def _read_png(path: str | os.PathLike) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            return np.asarray(im.convert("L"), dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG/PGM/PPM image; returns (H, W) grayscale or (H, W, 3) RGB."""
    try:
        with open(path, "rb") as f:
            magic = f.read(8)
    except OSError as exc:
        raise FormatError(f"cannot read image {os.fspath(path)}: {exc}") from exc
    if magic[:2] in (b"P5", b"P6"):
        return read_pnm(path)
    if magic == _PNG_MAGIC:
        return _read_png(path)
    raise FormatError(f"unrecognized image format: {os.fspath(path)}")


def load_grayscale(path: str | os.PathLike) -> np.ndarray:
    """Load any supported image and reduce it to grayscale."""
    arr = load_image(path)
    if arr.ndim == 3:
        return to_grayscale(arr)
    return arr


def gray_from_binary(binary: np.ndarray) -> np.ndarray:
    """Render a binary raster as grayscale: ink 0 on background 255."""
    arr = require_binary(binary)
    return np.where(arr, np.uint8(0), np.uint8(255))


def binary_from_gray(gray: np.ndarray) -> np.ndarray:
    """Inverse of :func:`gray_from_binary`: intensities < 128 are ink."""
    return require_gray(gray) < 128


def png_bytes(gray_or_rgb: np.ndarray) -> bytes:
    """Encode an image as PNG (convenience for notebooks/demos)."""
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(gray_or_rgb).save(buf, format="PNG")
    return buf.getvalue()
