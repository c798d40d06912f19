"""Grayscale image container, PGM/PNG file I/O and intensity histograms."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

__all__ = ["GrayImage", "Histogram", "load_image", "save_image", "compute_histogram"]

# Color inputs are reduced with the usual BT.601 luma weights. The integer
# form below is an exact round-half-up of 0.299R + 0.587G + 0.114B because
# the weights have exactly three decimals.
_LUMA_R, _LUMA_G, _LUMA_B = 299, 587, 114


@dataclass(frozen=True)
class GrayImage:
    """8-bit single-band raster.

    ``pixels`` is a read-only uint8 array of shape (height, width), row-major.
    Instances are immutable and safe to share across threads.
    """

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {px.shape}")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class Histogram:
    """256-bin intensity count vector; ``total`` equals the source pixel count."""

    counts: np.ndarray = field(repr=False)
    total: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (256,):
            raise ValueError(f"histogram must have 256 bins, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("histogram counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total", int(counts.sum()))

    def cdf(self) -> np.ndarray:
        """Cumulative distribution in [0, 1] as float64."""
        return np.cumsum(self.counts) / max(self.total, 1)


def compute_histogram(img: GrayImage) -> Histogram:
    """Count pixels per intensity level."""
    counts = np.bincount(img.pixels.ravel(), minlength=256)
    return Histogram(counts=counts)


def _rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    r = rgb[..., 0].astype(np.int64)
    g = rgb[..., 1].astype(np.int64)
    b = rgb[..., 2].astype(np.int64)
    return ((_LUMA_R * r + _LUMA_G * g + _LUMA_B * b + 500) // 1000).astype(np.uint8)


def _load_pgm(path: str) -> GrayImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")

    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed between tokens.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval

    width, height, maxval = (int(t) for t in tokens)
    if width < 1 or height < 1:
        raise ValueError(f"{path}: zero-dimension image")
    if maxval > 255:
        raise ValueError(f"{path}: unsupported bit depth (maxval {maxval} > 255)")
    raw = data[pos : pos + width * height]
    if len(raw) != width * height:
        raise ValueError(f"{path}: pixel payload truncated")
    return GrayImage(np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy())


def _load_png(path: str) -> GrayImage:
    with Image.open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode in ("I;16", "I;16B", "I", "I;16L"):
            raise ValueError(f"{path}: unsupported bit depth (>8 per channel)")
        if im.mode in ("RGB", "RGBA"):
            arr = np.asarray(im.convert("RGBA") if im.mode == "RGBA" else im)
            return GrayImage(_rgb_to_gray(arr[..., :3]))
        if im.mode in ("L", "LA", "1"):
            return GrayImage(np.asarray(im.convert("L")))
        raise ValueError(f"{path}: unsupported PNG mode {im.mode}")


def load_image(path: str) -> GrayImage:
    """Load an 8-bit grayscale image from a binary PGM (P5) or PNG file.

    Color PNGs are reduced to luminance with weights 0.299/0.587/0.114
    rounded to the nearest integer.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic.startswith(b"P5"):
        return _load_pgm(path)
    if magic.startswith(b"\x89PNG"):
        return _load_png(path)
    raise ValueError(f"{path}: unsupported format (need binary PGM or PNG)")


def save_image(img: GrayImage, path: str) -> None:
    """Write ``img`` losslessly; the format follows the file extension
    (.pgm for binary PGM, anything else is written as 8-bit grayscale PNG)."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(img.pixels.tobytes())
    else:
        Image.fromarray(img.pixels, mode="L").save(path, format="PNG")
