"""Preprocessing: histogram specification of the moving image onto the
reference, then adaptive Wiener denoising of both images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .raster import GrayImage, compute_histogram

__all__ = ["EnhanceConfig", "match_histogram", "wiener_filter", "preprocess_pair"]

_VAR_FLOOR = 1e-12  # guards the gain division for exactly-flat windows


@dataclass(frozen=True)
class EnhanceConfig:
    wiener_window: int = 5
    noise_variance: float | None = None

    def __post_init__(self):
        if self.wiener_window < 3 or self.wiener_window % 2 == 0:
            raise ValueError(f"wiener_window must be odd and >= 3, got {self.wiener_window}")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")


def match_histogram(moving: GrayImage, reference: GrayImage) -> GrayImage:
    """Remap the moving image's gray levels so its cumulative distribution
    approximates the reference's.

    Each level v maps to the level u minimizing |CDF_ref(u) - CDF_mov(v)|,
    taking the lowest u on ties. The mapping is monotonically non-decreasing.
    """
    cdf_mov = compute_histogram(moving).cdf()
    cdf_ref = compute_histogram(reference).cdf()
    # 256x256 |difference| table; argmin along axis 1 returns the first
    # (lowest) index on ties, which is the documented tie rule.
    diff = np.abs(cdf_ref[None, :] - cdf_mov[:, None])
    lut = np.argmin(diff, axis=1).astype(np.uint8)
    return GrayImage(lut[moving.pixels])


def wiener_filter(img: GrayImage, cfg: EnhanceConfig | None = None) -> GrayImage:
    """Adaptive local Wiener filter.

    Per pixel, with local mean m and variance s2 over the window and noise
    variance n2 (estimated as the mean of all local variances when not
    given): out = m + max(s2 - n2, 0) / max(s2, eps) * (in - m).
    Borders use replicated edges.
    """
    cfg = cfg or EnhanceConfig()
    win = cfg.wiener_window
    if win > 2 * min(img.width, img.height):
        raise ValueError(
            f"wiener window {win} larger than twice the smaller image dimension "
            f"({img.width}x{img.height})"
        )
    x = img.pixels.astype(np.float64)
    mean = uniform_filter(x, size=win, mode="nearest")
    sqmean = uniform_filter(x * x, size=win, mode="nearest")
    var = np.maximum(sqmean - mean * mean, 0.0)

    noise = cfg.noise_variance if cfg.noise_variance is not None else float(var.mean())
    gain = np.maximum(var - noise, 0.0) / np.maximum(var, _VAR_FLOOR)
    out = mean + gain * (x - mean)
    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def preprocess_pair(
    img1: GrayImage, img2: GrayImage, cfg: EnhanceConfig | None = None
) -> tuple[GrayImage, GrayImage]:
    """Histogram-match image 2 onto image 1, then Wiener-filter both.

    Image 1 is the reference frame, image 2 the moving image.
    """
    cfg = cfg or EnhanceConfig()
    matched = match_histogram(img2, img1)
    return wiener_filter(img1, cfg), wiener_filter(matched, cfg)
