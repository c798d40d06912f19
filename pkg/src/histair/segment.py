"""Histogram-mode segmentation under a relaxation parameter and extraction
of labeled connected regions, repeated over several relaxation levels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .raster import GrayImage, Histogram, compute_histogram

__all__ = [
    "SegmentationConfig",
    "ModeSet",
    "LabeledRegions",
    "SegmentationError",
    "smooth_histogram",
    "detect_modes",
    "threshold_by_modes",
    "extract_regions",
    "segment_multilevel",
]

BACKGROUND = -1  # mode-map value for pixels outside every mode interval


class SegmentationError(RuntimeError):
    """Raised when segmentation cannot produce usable regions."""


@dataclass(frozen=True)
class SegmentationConfig:
    """Knobs for the multi-level histogram segmentation.

    ``alpha_levels`` are relaxation parameters in (0, 1); duplicates are
    dropped and the list is processed in decreasing order.
    """

    alpha_levels: tuple[float, ...] = (0.20, 0.10, 0.05)
    smoothing_radius: int = 2
    min_object_area: int = 16
    max_objects_per_level: int = 200
    connectivity: int = 8

    def __post_init__(self):
        levels = tuple(sorted(set(float(a) for a in self.alpha_levels), reverse=True))
        if not levels:
            raise ValueError("alpha_levels must be non-empty")
        if any(not (0.0 < a < 1.0) for a in levels):
            raise ValueError(f"every alpha must lie in (0, 1), got {levels}")
        object.__setattr__(self, "alpha_levels", levels)
        if self.smoothing_radius < 0:
            raise ValueError("smoothing_radius must be >= 0")
        if self.min_object_area < 1:
            raise ValueError("min_object_area must be >= 1")
        if self.max_objects_per_level < 1:
            raise ValueError("max_objects_per_level must be >= 1")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class ModeSet:
    """Detected histogram modes as (peak, left_valley, right_valley) triples,
    ordered by peak bin. Consecutive modes share their valley bin, so the
    intervals tile [0, 255]."""

    modes: tuple[tuple[int, int, int], ...]
    alpha: float

    def __post_init__(self):
        prev_right = None
        for peak, left, right in self.modes:
            if not (0 <= left <= peak <= right <= 255):
                raise ValueError(f"invalid mode triple ({peak}, {left}, {right})")
            if prev_right is not None and left < prev_right:
                raise ValueError("mode intervals overlap")
            prev_right = right

    def __len__(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class LabeledRegions:
    """Connected regions of one segmentation level.

    ``labels`` maps each pixel to a region label (0 = background/unassigned);
    labels are assigned in raster-scan discovery order starting at 1.
    ``pixels[k]`` is an (n, 2) array of (x, y) coordinates for label k+1,
    ``mode_index[k]`` the histogram mode the region belongs to.
    """

    labels: np.ndarray = field(repr=False)
    pixels: tuple[np.ndarray, ...] = field(repr=False)
    mode_index: tuple[int, ...]
    source_alpha: float
    mode_set: ModeSet

    def __post_init__(self):
        self.labels.flags.writeable = False
        for px in self.pixels:
            px.flags.writeable = False

    @property
    def region_count(self) -> int:
        return len(self.pixels)


def smooth_histogram(hist: Histogram | np.ndarray, radius: int) -> np.ndarray:
    """Centered moving average with window 2*radius+1.

    Near the array ends the average runs over the in-range part of the
    window only (no renormalization of total mass is applied).
    """
    counts = hist.counts if isinstance(hist, Histogram) else np.asarray(hist)
    counts = counts.astype(np.float64)
    if radius == 0:
        return counts.copy()
    window = 2 * radius + 1
    kernel = np.ones(window)
    sums = np.convolve(counts, kernel, mode="same")
    # number of in-range bins under each window position
    denom = np.convolve(np.ones_like(counts), kernel, mode="same")
    return sums / denom


def _local_maxima(values: np.ndarray) -> list[int]:
    """Plateau-aware local maxima.

    A maximal run of equal values is a local maximum when the nearest
    differing neighbor on each existing side is strictly smaller; runs
    touching an array end satisfy that side by convention. Each plateau
    contributes its center bin.
    """
    n = len(values)
    peaks = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left_ok = i == 0 or values[i - 1] < values[i]
        right_ok = j == n - 1 or values[j + 1] < values[i]
        if left_ok and right_ok:
            peaks.append((i + j) // 2)
        i = j + 1
    return peaks


def detect_modes(smoothed: np.ndarray, alpha: float) -> ModeSet:
    """Identify histogram modes subject to the relaxation parameter.

    Procedure: (1) plateau-aware local maxima; (2) drop maxima whose height
    falls below alpha times the global maximum (flat regions); (3) merge
    adjacent survivors whenever the minimum between them exceeds
    (1 - alpha) * min(peak heights), keeping the taller peak (the lower bin
    on equal heights); (4) place valleys at the argmin strictly between
    consecutive peaks (lowest bin on ties), with the outermost valleys
    pinned to bins 0 and 255.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    values = np.asarray(smoothed, dtype=np.float64)
    if values.shape != (256,):
        raise ValueError(f"expected a 256-bin vector, got shape {values.shape}")
    peak_max = values.max()
    if peak_max <= 0:
        raise SegmentationError("histogram is empty (all zero counts)")

    peaks = [p for p in _local_maxima(values) if values[p] >= alpha * peak_max]
    if not peaks:  # can only happen on pathological plateaus at the max
        peaks = [int(np.argmax(values))]

    # Merge shallow-valley neighbors, restarting the left-to-right scan
    # after each merge so the outcome does not depend on traversal state.
    merged = True
    while merged and len(peaks) > 1:
        merged = False
        for k in range(len(peaks) - 1):
            a, b = peaks[k], peaks[k + 1]
            between = values[a + 1 : b]
            low = between.min() if between.size else min(values[a], values[b])
            if low > (1.0 - alpha) * min(values[a], values[b]):
                if values[a] >= values[b]:
                    del peaks[k + 1]
                else:
                    del peaks[k]
                merged = True
                break

    valleys = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        between = values[a + 1 : b]
        valleys.append(a + 1 + int(np.argmin(between)))
    bounds = [0] + valleys + [255]
    modes = tuple((p, bounds[i], bounds[i + 1]) for i, p in enumerate(peaks))
    return ModeSet(modes=modes, alpha=alpha)


def threshold_by_modes(img: GrayImage, mode_set: ModeSet) -> np.ndarray:
    """Assign each pixel the index of the mode whose valley interval contains
    its intensity (the lower mode wins on a shared valley bin); pixels
    covered by no interval become BACKGROUND."""
    if len(mode_set) == 0:
        raise ValueError("mode set is empty")
    lut = np.full(256, BACKGROUND, dtype=np.int32)
    for idx in reversed(range(len(mode_set.modes))):
        _, left, right = mode_set.modes[idx]
        lut[left : right + 1] = idx
    return lut[img.pixels]


_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def extract_regions(
    mode_map: np.ndarray,
    cfg: SegmentationConfig,
    alpha: float = 0.0,
    mode_set: ModeSet | None = None,
) -> LabeledRegions:
    """Connected-component labeling within each mode class independently.

    Regions smaller than ``min_object_area`` are dropped; at most
    ``max_objects_per_level`` regions are kept (largest first, smaller
    discovery label on ties). Surviving regions are relabeled 1..K in
    raster-scan discovery order.
    """
    structure = _STRUCT_8 if cfg.connectivity == 8 else _STRUCT_4
    combined = np.zeros(mode_map.shape, dtype=np.int64)
    combined_mode = {}
    offset = 0
    for mode_idx in np.unique(mode_map):
        if mode_idx == BACKGROUND:
            continue
        lbl, n = ndimage.label(mode_map == mode_idx, structure=structure)
        mask = lbl > 0
        combined[mask] = lbl[mask] + offset
        for k in range(1, n + 1):
            combined_mode[offset + k] = int(mode_idx)
        offset += n

    flat = combined.ravel()
    ids, first_index = np.unique(flat, return_index=True)
    areas = np.bincount(flat, minlength=offset + 1)
    keep = [
        (int(first_index[i]), int(rid))
        for i, rid in enumerate(ids)
        if rid != 0 and areas[rid] >= cfg.min_object_area
    ]
    if len(keep) > cfg.max_objects_per_level:
        # rank by area (desc), ties by earlier discovery
        keep.sort(key=lambda t: (-areas[t[1]], t[0]))
        keep = keep[: cfg.max_objects_per_level]
    keep.sort()  # raster-scan discovery order

    relabel = np.zeros(offset + 1, dtype=np.int32)
    for new_label, (_, rid) in enumerate(keep, start=1):
        relabel[rid] = new_label
    labels = relabel[combined]

    pixel_lists = []
    mode_indices = []
    obj = ndimage.find_objects(labels, max_label=len(keep))
    for new_label, (_, rid) in enumerate(keep, start=1):
        sl = obj[new_label - 1]
        ys, xs = np.nonzero(labels[sl] == new_label)
        xy = np.column_stack([xs + sl[1].start, ys + sl[0].start]).astype(np.int64)
        pixel_lists.append(xy)
        mode_indices.append(combined_mode[rid])

    if mode_set is None:
        mode_set = ModeSet(modes=((0, 0, 255),), alpha=alpha or 0.5)
    return LabeledRegions(
        labels=labels,
        pixels=tuple(pixel_lists),
        mode_index=tuple(mode_indices),
        source_alpha=alpha,
        mode_set=mode_set,
    )


def segment_level(img: GrayImage, alpha: float, cfg: SegmentationConfig) -> LabeledRegions:
    """Run smooth -> detect modes -> threshold -> extract for one alpha."""
    smoothed = smooth_histogram(compute_histogram(img), cfg.smoothing_radius)
    mode_set = detect_modes(smoothed, alpha)
    mode_map = threshold_by_modes(img, mode_set)
    return extract_regions(mode_map, cfg, alpha=alpha, mode_set=mode_set)


def segment_multilevel(img: GrayImage, cfg: SegmentationConfig) -> list[LabeledRegions]:
    """Segment the image once per relaxation level (decreasing alpha)."""
    return [segment_level(img, alpha, cfg) for alpha in cfg.alpha_levels]
