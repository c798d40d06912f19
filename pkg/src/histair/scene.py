"""Synthetic multimodal test scene: anisotropic gray-level blobs on a
blotchy background, used by the harness and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .raster import GrayImage

__all__ = ["make_test_scene", "DEFAULT_SCENE_SEED", "BLOB_LEVELS", "BACKGROUND_TONES"]

DEFAULT_SCENE_SEED = 2024

# Background tones sit close together at the bottom of the range; blob levels
# are spaced far enough apart (>= 65) that sigma-10 noise cannot mix their
# populations, and far above the background so warp fill (value 0) folds into
# the background side of the histogram.
BACKGROUND_TONES = (6, 14, 22, 30)
BLOB_LEVELS = (95, 165, 235)


def _background(size: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth random blotch field quantized into the background tones at
    equal quantiles, with a gentle shading ramp inside each tone so the
    histogram populations are narrow bands rather than single spikes."""
    ys, xs = np.mgrid[0:size, 0:size] / size
    field = np.zeros((size, size))
    for _ in range(5):
        fx, fy = rng.uniform(-1.7, 1.7, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        field += rng.uniform(0.5, 1.0) * np.cos(2 * np.pi * (fx * xs + fy * ys) + phase)
    edges = np.quantile(field, [0.25, 0.5, 0.75])
    tone_idx = np.searchsorted(edges, field)
    tones = np.asarray(BACKGROUND_TONES, dtype=np.int16)[tone_idx]
    shade = np.rint(3.0 * np.cos(2 * np.pi * (0.7 * xs + 1.1 * ys))).astype(np.int16)
    return np.clip(tones + shade, 0, 255)


def _ellipse_mask(xs, ys, cx, cy, a, b, phi):
    u = (xs - cx) * np.cos(phi) + (ys - cy) * np.sin(phi)
    v = -(xs - cx) * np.sin(phi) + (ys - cy) * np.cos(phi)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _capsule_mask(xs, ys, cx, cy, half_len, radius, phi):
    u = (xs - cx) * np.cos(phi) + (ys - cy) * np.sin(phi)
    v = -(xs - cx) * np.sin(phi) + (ys - cy) * np.cos(phi)
    du = np.maximum(np.abs(u) - half_len, 0.0)
    return du * du + v * v <= radius * radius


def _rect_mask(xs, ys, cx, cy, half_w, half_h, phi):
    u = (xs - cx) * np.cos(phi) + (ys - cy) * np.sin(phi)
    v = -(xs - cx) * np.sin(phi) + (ys - cy) * np.cos(phi)
    return (np.abs(u) <= half_w) & (np.abs(v) <= half_h)


def make_test_scene(size: int = 640, seed: int = DEFAULT_SCENE_SEED) -> GrayImage:
    """Deterministic test scene of ``size`` x ``size`` pixels.

    Thirty anisotropic blobs (ellipses, capsules, rectangles) are laid out
    on a jittered 6x5 grid, cycling through three widely separated gray
    levels, over a four-tone blotchy background. Blob orientations and
    shapes vary so the matcher has discriminative features and the rotation
    vote has plenty of anisotropic objects.
    """
    if size < 400:
        raise ValueError("scene must be at least 400x400 for the reference scenarios")
    rng = np.random.default_rng(seed)
    canvas = _background(size, rng)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)

    cols, rows = 6, 5
    cell_w, cell_h = size / cols, size / rows
    cells = [(i, j) for j in range(rows) for i in range(cols)]
    rng.shuffle(cells)

    shapes = ("ellipse", "ellipse", "capsule", "ellipse", "rect")
    for k, (ci, cj) in enumerate(cells):
        level = BLOB_LEVELS[k % len(BLOB_LEVELS)]
        shape = shapes[k % len(shapes)]
        cx = (ci + 0.5) * cell_w + rng.uniform(-7, 7)
        cy = (cj + 0.5) * cell_h + rng.uniform(-9, 9)
        # long axis roughly along the (taller) cell, with jitter
        phi = np.deg2rad(90.0 + rng.uniform(-32, 32))
        a = rng.uniform(0.42, 0.50) * cell_h
        ratio = rng.uniform(1.8, 2.9)
        b = a / ratio

        # shrink until the blob stays inside its cell minus a separation gap
        for _ in range(20):
            if shape == "ellipse":
                mask = _ellipse_mask(xs, ys, cx, cy, a, b, phi)
            elif shape == "capsule":
                mask = _capsule_mask(xs, ys, cx, cy, a - b, b, phi)
            else:
                mask = _rect_mask(xs, ys, cx, cy, a * 0.82, b * 0.9, phi)
            col = np.nonzero(mask.any(axis=0))[0]
            row = np.nonzero(mask.any(axis=1))[0]
            gap = 3
            if (
                col[0] >= ci * cell_w + gap
                and col[-1] <= (ci + 1) * cell_w - 1 - gap
                and row[0] >= cj * cell_h + gap
                and row[-1] <= (cj + 1) * cell_h - 1 - gap
            ):
                break
            a *= 0.93
            b *= 0.93
        # gentle interior shading ramp (about +/-7 levels across the blob)
        gdir = rng.uniform(0, 2 * np.pi)
        ramp = (np.cos(gdir) * (xs - cx) + np.sin(gdir) * (ys - cy)) / a
        values = np.clip(level + np.rint(7.0 * ramp), 0, 255).astype(np.int16)
        canvas = np.where(mask, values, canvas)

    # sparse salt sprinkle: a tiny mass at every gray level keeps the
    # histogram-matching map dense, so warped populations never pile up on
    # isolated levels (isolated impulses survive the adaptive Wiener filter)
    n_salt = int(0.003 * size * size)
    sy = rng.integers(0, size, n_salt)
    sx = rng.integers(0, size, n_salt)
    canvas[sy, sx] = rng.integers(0, 256, n_salt)

    return GrayImage(np.clip(canvas, 0, 255).astype(np.uint8))
