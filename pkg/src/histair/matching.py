"""Cost-function matching of extracted regions across the two images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import RegionFeatures, compute_region_features, wrap_180
from .segment import LabeledRegions, SegmentationError

__all__ = [
    "MatchingConfig",
    "PooledRegion",
    "MatchCandidate",
    "MatchingError",
    "gamma_cost",
    "pool_regions",
    "build_candidates",
]


class MatchingError(RuntimeError):
    """Raised when no usable match candidates can be produced."""


@dataclass(frozen=True)
class MatchingConfig:
    gamma_max: float = 0.5
    mutual_best: bool = True

    def __post_init__(self):
        if self.gamma_max <= 0:
            raise ValueError("gamma_max must be > 0")


@dataclass(frozen=True)
class PooledRegion:
    """One region in the cross-level candidate pool."""

    alpha: float
    label: int
    mode_index: int
    features: RegionFeatures


@dataclass(frozen=True)
class MatchCandidate:
    obj1: PooledRegion
    obj2: PooledRegion
    gamma: float
    d_theta: float
    both_anisotropic: bool


def gamma_cost(f1: RegionFeatures, f2: RegionFeatures) -> float:
    """Dissimilarity of two regions: the sum over the four descriptors of
    |v1 - v2| divided by the per-pair mean (v1 + v2) / 2.

    Symmetric, zero only for identical descriptor values.
    """
    total = 0.0
    for v1, v2 in (
        (f1.area, f2.area),
        (f1.axis_ratio, f2.axis_ratio),
        (f1.perimeter, f2.perimeter),
        (f1.fractal_dim, f2.fractal_dim),
    ):
        if not (math.isfinite(v1) and math.isfinite(v2)) or v1 <= 0 or v2 <= 0:
            raise ValueError(f"features must be finite and positive, got {v1}, {v2}")
        total += abs(v1 - v2) / ((v1 + v2) / 2.0)
    return total


def _gamma_table(pool1: list[PooledRegion], pool2: list[PooledRegion]) -> np.ndarray:
    """Vectorized cross-product costs, term accumulation ordered exactly as
    in gamma_cost so the two agree bitwise."""

    def columns(pool):
        f = [r.features for r in pool]
        cols = np.array(
            [[x.area, x.axis_ratio, x.perimeter, x.fractal_dim] for x in f], dtype=np.float64
        )
        if not np.isfinite(cols).all() or (cols <= 0).any():
            raise ValueError("features must be finite and positive")
        return cols

    c1 = columns(pool1)[:, None, :]  # (n1, 1, 4)
    c2 = columns(pool2)[None, :, :]  # (1, n2, 4)
    terms = np.abs(c1 - c2) / ((c1 + c2) / 2.0)
    return ((terms[..., 0] + terms[..., 1]) + terms[..., 2]) + terms[..., 3]


def pool_regions(levels: list[LabeledRegions]) -> list[PooledRegion]:
    """Flatten per-alpha segmentations into one candidate pool, computing
    the descriptors of every region. Pool order: levels as given (decreasing
    alpha), labels ascending within a level."""
    pool = []
    for level in levels:
        for idx, px in enumerate(level.pixels):
            pool.append(
                PooledRegion(
                    alpha=level.source_alpha,
                    label=idx + 1,
                    mode_index=level.mode_index[idx],
                    features=compute_region_features(px),
                )
            )
    return pool


def build_candidates(
    pool1: list[PooledRegion],
    pool2: list[PooledRegion],
    cfg: MatchingConfig | None = None,
) -> list[MatchCandidate]:
    """Evaluate the cost over the full cross product and keep candidate pairs.

    Pairs with cost above ``gamma_max`` are dropped; with ``mutual_best``
    only pairs where each region is the other's minimum-cost partner remain
    (ties resolved toward the earlier pool entry). The orientation
    difference is wrapped into (-90, 90].
    """
    cfg = cfg or MatchingConfig()
    if not pool1 or not pool2:
        raise SegmentationError("segmentation produced no usable objects")

    n1, n2 = len(pool1), len(pool2)
    gammas = _gamma_table(pool1, pool2)

    if cfg.mutual_best:
        # argmin returns the first index on ties = earlier pool entry
        best2 = np.argmin(gammas, axis=1)
        best1 = np.argmin(gammas, axis=0)
        pairs = [(i, int(best2[i])) for i in range(n1) if int(best1[best2[i]]) == i]
    else:
        pairs = [(i, j) for i in range(n1) for j in range(n2)]

    out = []
    for i, j in pairs:
        if gammas[i, j] > cfg.gamma_max:
            continue
        r1, r2 = pool1[i], pool2[j]
        out.append(
            MatchCandidate(
                obj1=r1,
                obj2=r2,
                gamma=float(gammas[i, j]),
                d_theta=wrap_180(r2.features.orientation_deg - r1.features.orientation_deg),
                both_anisotropic=not (r1.features.isotropic or r2.features.isotropic),
            )
        )
    return out
