"""Morphological descriptors of extracted regions: area, perimeter, axis
ratio, box-counting fractal dimension, plus centroid and orientation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegionFeatures",
    "compute_area",
    "compute_perimeter",
    "compute_axis_ratio_and_orientation",
    "compute_fractal_dimension",
    "compute_centroid",
    "compute_region_features",
    "wrap_180",
]

# Relative eigenvalue gap below which a region counts as isotropic and its
# orientation is reported as 0 (a square's orientation is undefined).
_ISOTROPY_EPS = 1e-12


def wrap_180(angle_deg: float) -> float:
    """Wrap an angle difference into (-90, 90] degrees (mod 180)."""
    return 90.0 - (90.0 - angle_deg) % 180.0


@dataclass(frozen=True)
class RegionFeatures:
    area: int
    perimeter: int
    axis_ratio: float
    fractal_dim: float
    centroid: tuple[float, float]
    orientation_deg: float
    isotropic: bool


def _bbox_mask(region: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Binary mask of the region on its bounding box, plus the box origin."""
    xs, ys = region[:, 0], region[:, 1]
    x0, y0 = int(xs.min()), int(ys.min())
    mask = np.zeros((int(ys.max()) - y0 + 1, int(xs.max()) - x0 + 1), dtype=bool)
    mask[ys - y0, xs - x0] = True
    return mask, x0, y0


def compute_area(region: np.ndarray) -> int:
    """Member pixel count."""
    return int(len(region))


def compute_perimeter(region: np.ndarray) -> int:
    """Count of region pixels with at least one 4-neighbor outside the
    region (out-of-image counts as outside)."""
    mask, _, _ = _bbox_mask(region)
    padded = np.pad(mask, 1)
    inner = padded[1:-1, 1:-1]
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return int((inner & ~interior).sum())


def _central_moments(region: np.ndarray) -> tuple[float, float, float]:
    """Bounding-box-relative central second moments with the 1/12 per-axis
    unit-pixel correction. Working in box-relative integer coordinates makes
    the result bit-identical under integer translation."""
    xs = region[:, 0] - region[:, 0].min()
    ys = region[:, 1] - region[:, 1].min()
    n = len(region)
    sx, sy = int(xs.sum()), int(ys.sum())
    sxx = int((xs * xs).sum())
    syy = int((ys * ys).sum())
    sxy = int((xs * ys).sum())
    mu20 = (sxx - sx * sx / n) / n + 1.0 / 12.0
    mu02 = (syy - sy * sy / n) / n + 1.0 / 12.0
    mu11 = (sxy - sx * sy / n) / n
    return mu20, mu02, mu11


def compute_axis_ratio_and_orientation(region: np.ndarray) -> tuple[float, float, bool]:
    """Axis ratio sqrt(l1/l2) of the inertia ellipse and the major-axis
    angle in degrees, in (-90, 90].

    Pixel coordinates have y pointing down; the returned angle is negated so
    positive values are counter-clockwise in the usual math orientation.
    Returns (ratio, angle, isotropic); isotropic regions report angle 0.
    """
    mu20, mu02, mu11 = _central_moments(region)
    half_trace = 0.5 * (mu20 + mu02)
    root = math.hypot(0.5 * (mu20 - mu02), mu11)
    lam1, lam2 = half_trace + root, half_trace - root
    ratio = math.sqrt(lam1 / lam2)

    if lam1 - lam2 <= _ISOTROPY_EPS * lam1:
        return ratio, 0.0, True
    angle_image = 0.5 * math.degrees(math.atan2(2.0 * mu11, mu20 - mu02))
    return ratio, wrap_180(-angle_image), False


def box_counts(mask: np.ndarray) -> tuple[list[int], list[int]]:
    """Box-counting table: for sizes 1, 2, 4, ... up to half the larger
    bounding-box side, the number of occupied grid cells (grid anchored at
    the bounding-box corner)."""
    h, w = mask.shape
    sizes, counts = [], []
    s = 1
    while s <= max(h, w) / 2:
        ph = (s - h % s) % s
        pw = (s - w % s) % s
        padded = np.pad(mask, ((0, ph), (0, pw)))
        blocks = padded.reshape(padded.shape[0] // s, s, padded.shape[1] // s, s)
        counts.append(int(blocks.any(axis=(1, 3)).sum()))
        sizes.append(s)
        s *= 2
    return sizes, counts


def compute_fractal_dimension(region: np.ndarray) -> float:
    """Box-counting dimension: least-squares slope of log N(s) against
    log(1/s), clamped to [1, 2].

    Degenerate regions (bounding box thinner than 2 pixels, or fewer than
    two usable box sizes) return 1.0 by convention; exactly two sizes fall
    back to the two-point slope.
    """
    mask, _, _ = _bbox_mask(region)
    if min(mask.shape) < 2:
        return 1.0
    sizes, counts = box_counts(mask)
    if len(sizes) < 2:
        return 1.0
    x = np.log(1.0 / np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(counts, dtype=np.float64))
    if len(sizes) == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
    else:
        slope = np.polyfit(x, y, 1)[0]
    return float(min(2.0, max(1.0, slope)))


def compute_centroid(region: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean of member pixel coordinates as (x, y)."""
    n = len(region)
    return (int(region[:, 0].sum()) / n, int(region[:, 1].sum()) / n)


def compute_region_features(region: np.ndarray) -> RegionFeatures:
    """All descriptors for one region given as an (n, 2) array of (x, y)."""
    region = np.asarray(region, dtype=np.int64)
    if region.ndim != 2 or region.shape[1] != 2 or len(region) == 0:
        raise ValueError("region must be a non-empty (n, 2) pixel array")
    ratio, angle, isotropic = compute_axis_ratio_and_orientation(region)
    return RegionFeatures(
        area=compute_area(region),
        perimeter=compute_perimeter(region),
        axis_ratio=ratio,
        fractal_dim=compute_fractal_dimension(region),
        centroid=compute_centroid(region),
        orientation_deg=angle,
        isotropic=isotropic,
    )
