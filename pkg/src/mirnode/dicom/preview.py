"""Grayscale preview rendering: linear windowing + nearest-neighbor scaling."""
from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .dataset import DicomDataset, RasterImage
from .errors import (
    NoPixelData,
    UnsupportedBitsAllocated,
    UnsupportedPhotometric,
)
from .tags import (
    BITS_ALLOCATED,
    COLUMNS,
    PHOTOMETRIC_INTERPRETATION,
    PIXEL_DATA,
    ROWS,
    WINDOW_CENTER,
    WINDOW_WIDTH,
)


def raster_from_dataset(ds: DicomDataset) -> RasterImage:
    """Frame 0 of uncompressed MONOCHROME2 pixel data."""
    el = ds.get(PIXEL_DATA)
    if el is None or el.vr == "SQ":
        raise NoPixelData("dataset has no PixelData")
    photometric = ds.get_string(PHOTOMETRIC_INTERPRETATION)
    if photometric != "MONOCHROME2":
        raise UnsupportedPhotometric(photometric or "<missing>")
    bits = ds.get_int(BITS_ALLOCATED)
    if bits not in (8, 16):
        raise UnsupportedBitsAllocated(str(bits))
    rows, cols = ds.get_int(ROWS), ds.get_int(COLUMNS)
    if not rows or not cols:
        raise NoPixelData("missing Rows/Columns")
    dtype = np.uint8 if bits == 8 else np.dtype("<u2")
    frame_bytes = rows * cols * dtype.itemsize if bits == 16 else rows * cols
    raw = el.raw
    if len(raw) < frame_bytes:
        raise NoPixelData(f"PixelData holds {len(raw)} bytes, frame needs {frame_bytes}")
    pixels = np.frombuffer(raw[:frame_bytes], dtype=dtype).reshape(rows, cols)
    return RasterImage(rows=rows, cols=cols, bits_allocated=bits, pixels=pixels.copy())


def window_samples(pixels: np.ndarray, center: float, width: float) -> np.ndarray:
    """Linear window mapping to 8-bit: clamp(((v-(c-0.5))/(w-1))+0.5, 0, 1)*255.

    Rounding is half away from zero. A single-valued window (w <= 1) cannot
    be mapped by the formula and degenerates to mid-gray 128.
    """
    v = pixels.astype(np.float64)
    if width <= 1.0:
        scaled = np.full(v.shape, 0.5)
    else:
        scaled = np.clip((v - (center - 0.5)) / (width - 1.0) + 0.5, 0.0, 1.0)
    return np.floor(scaled * 255.0 + 0.5).astype(np.uint8)


def auto_window(pixels: np.ndarray) -> tuple[float, float]:
    """Full-range window: c = (min+max)/2, w = max-min+1."""
    lo, hi = float(pixels.min()), float(pixels.max())
    return (lo + hi) / 2.0, hi - lo + 1.0


def downsample_nearest(pixels: np.ndarray, max_edge: int) -> np.ndarray:
    """Shrink so the longer edge equals max_edge; never upscales."""
    rows, cols = pixels.shape
    long_edge = max(rows, cols)
    if long_edge <= max_edge:
        return pixels
    scale = max_edge / long_edge
    out_rows = max(1, int(rows * scale + 0.5))
    out_cols = max(1, int(cols * scale + 0.5))
    row_idx = np.minimum(((np.arange(out_rows) + 0.5) * rows / out_rows).astype(np.int64), rows - 1)
    col_idx = np.minimum(((np.arange(out_cols) + 0.5) * cols / out_cols).astype(np.int64), cols - 1)
    return pixels[np.ix_(row_idx, col_idx)]


def render_preview(ds: DicomDataset, max_edge: int) -> bytes:
    """8-bit grayscale PNG preview of frame 0."""
    raster = raster_from_dataset(ds)
    center = ds.get_float(WINDOW_CENTER)
    width = ds.get_float(WINDOW_WIDTH)
    if center is None or width is None:
        center, width = auto_window(raster.pixels)
    gray = window_samples(raster.pixels, center, width)
    gray = downsample_nearest(gray, max_edge)
    buf = io.BytesIO()
    Image.fromarray(gray, mode="L").save(buf, format="PNG")
    return buf.getvalue()
