"""Rigid-body resampling and the end-to-end registration pipeline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .enhance import EnhanceConfig, preprocess_pair
from .estimate import (
    RigidTransform,
    VoteConfig,
    VoteDiagnostics,
    estimate_transform,
    image_center,
    rotation_matrix,
)
from .matching import MatchCandidate, MatchingConfig, MatchingError, build_candidates, pool_regions
from .raster import GrayImage
from .segment import SegmentationConfig, segment_level, segment_multilevel

__all__ = [
    "ResampleConfig",
    "PipelineConfig",
    "RegistrationResult",
    "invert",
    "apply_transform",
    "register_pair",
]


@dataclass(frozen=True)
class ResampleConfig:
    interpolation: str = "bilinear"
    fill_value: int = 0

    def __post_init__(self):
        if self.interpolation not in ("nearest", "bilinear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if not (0 <= self.fill_value <= 255):
            raise ValueError("fill_value must lie in [0, 255]")


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform about the same center: theta' = -theta and
    (dx', dy') = -R(-theta) (dx, dy)."""
    rot = rotation_matrix(-t.theta_deg)
    dx, dy = -(rot @ np.array([t.dx, t.dy]))
    return RigidTransform(theta_deg=-t.theta_deg, dx=float(dx), dy=float(dy))


def apply_transform(
    moving: GrayImage,
    t: RigidTransform,
    out_dims: tuple[int, int] | None = None,
    cfg: ResampleConfig | None = None,
) -> GrayImage:
    """Resample ``moving`` so its content moves by ``t``.

    Inverse mapping: each output pixel p samples the moving image at
    t^-1(p) = R(-theta) (p - c - d) + c, with the rotation center c taken
    from the output frame. Out-of-source samples get the fill value.

    When registering, pass the inverse of the estimated transform; the
    sampling map is then the estimated transform itself, pulling each
    reference pixel from its matching moving-image location.
    """
    cfg = cfg or ResampleConfig()
    out_w, out_h = out_dims if out_dims is not None else (moving.width, moving.height)
    center = image_center((out_w, out_h))
    rot = rotation_matrix(-t.theta_deg)

    ys, xs = np.mgrid[0:out_h, 0:out_w]
    px = xs - center[0] - t.dx
    py = ys - center[1] - t.dy
    qx = rot[0, 0] * px + rot[0, 1] * py + center[0]
    qy = rot[1, 0] * px + rot[1, 1] * py + center[1]

    src = moving.pixels.astype(np.float64)
    h, w = src.shape
    if cfg.interpolation == "nearest":
        xi = np.rint(qx).astype(np.int64)
        yi = np.rint(qy).astype(np.int64)
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        out = np.full((out_h, out_w), float(cfg.fill_value))
        out[valid] = src[yi[valid], xi[valid]]
    else:
        x0 = np.floor(qx).astype(np.int64)
        y0 = np.floor(qy).astype(np.int64)
        fx = qx - x0
        fy = qy - y0
        valid = (qx >= 0) & (qx <= w - 1) & (qy >= 0) & (qy <= h - 1)
        x0c = np.clip(x0, 0, w - 1)
        y0c = np.clip(y0, 0, h - 1)
        x1c = np.clip(x0 + 1, 0, w - 1)
        y1c = np.clip(y0 + 1, 0, h - 1)
        top = src[y0c, x0c] * (1 - fx) + src[y0c, x1c] * fx
        bot = src[y1c, x0c] * (1 - fx) + src[y1c, x1c] * fx
        out = top * (1 - fy) + bot * fy
        out[~valid] = float(cfg.fill_value)
    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


@dataclass(frozen=True)
class PipelineConfig:
    enhance: EnhanceConfig = field(default_factory=EnhanceConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    vote: VoteConfig = field(default_factory=VoteConfig)
    resample: ResampleConfig = field(default_factory=ResampleConfig)


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    registered: GrayImage
    diagnostics: VoteDiagnostics
    candidates: list[MatchCandidate]
    object_counts: dict
    stage_timings_ms: dict


def register_pair(
    img1: GrayImage,
    img2: GrayImage,
    cfg: PipelineConfig | None = None,
    threads: int = 1,
) -> RegistrationResult:
    """Full pipeline: preprocess, segment at every relaxation level, extract
    features, match, vote the transform, and resample image 2 onto the
    image-1 frame.

    ``threads`` caps the worker count for the per-level segmentation tasks;
    results are identical to sequential execution.
    """
    cfg = cfg or PipelineConfig()
    timings = {}

    tic = time.perf_counter()
    pre1, pre2 = preprocess_pair(img1, img2, cfg.enhance)
    timings["enhance"] = (time.perf_counter() - tic) * 1000.0

    tic = time.perf_counter()
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        tasks = [(img, alpha) for img in (pre1, pre2) for alpha in cfg.segmentation.alpha_levels]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: segment_level(t[0], t[1], cfg.segmentation), tasks))
        half = len(cfg.segmentation.alpha_levels)
        levels1, levels2 = results[:half], results[half:]
    else:
        levels1 = segment_multilevel(pre1, cfg.segmentation)
        levels2 = segment_multilevel(pre2, cfg.segmentation)
    timings["segment"] = (time.perf_counter() - tic) * 1000.0

    tic = time.perf_counter()
    pool1 = pool_regions(levels1)
    pool2 = pool_regions(levels2)
    timings["features"] = (time.perf_counter() - tic) * 1000.0

    tic = time.perf_counter()
    candidates = build_candidates(pool1, pool2, cfg.matching)
    if not candidates:
        raise MatchingError("matching produced no candidates")
    timings["matching"] = (time.perf_counter() - tic) * 1000.0

    tic = time.perf_counter()
    transform, diagnostics = estimate_transform(
        candidates, (img1.width, img1.height), cfg.vote
    )
    timings["estimate"] = (time.perf_counter() - tic) * 1000.0

    tic = time.perf_counter()
    registered = apply_transform(
        img2, invert(transform), (img1.width, img1.height), cfg.resample
    )
    timings["warp"] = (time.perf_counter() - tic) * 1000.0

    object_counts = {
        "image1": {f"{lv.source_alpha:g}": lv.region_count for lv in levels1},
        "image2": {f"{lv.source_alpha:g}": lv.region_count for lv in levels2},
    }
    return RegistrationResult(
        transform=transform,
        registered=registered,
        diagnostics=diagnostics,
        candidates=candidates,
        object_counts=object_counts,
        stage_timings_ms=timings,
    )
