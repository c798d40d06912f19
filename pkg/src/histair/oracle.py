"""Brute-force registration oracle, independent of the feature pipeline.

For every rotation on the grid, the reference is rotated once and the whole
integer-shift grid is scored at once through FFT cross-correlations of the
masked normalized cross-correlation (only samples where the rotated
reference is valid enter the sums). The argmax grid point wins.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.fft import next_fast_len, irfft2, rfft2

from .estimate import RigidTransform, image_center, rotation_matrix
from .raster import GrayImage

__all__ = ["oracle_search"]

# candidate shifts whose overlap falls below this fraction of the frame are
# ignored; tiny overlaps make NCC degenerate
_MIN_OVERLAP = 0.25
_MIN_VARIANCE = 1e-3


def _rotate_with_mask(img: GrayImage, theta_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate content by theta about the image center with bilinear sampling;
    returns (float image, validity mask)."""
    h, w = img.height, img.width
    center = image_center((w, h))
    rot = rotation_matrix(-theta_deg)
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs - center[0]
    py = ys - center[1]
    qx = rot[0, 0] * px + rot[0, 1] * py + center[0]
    qy = rot[1, 0] * px + rot[1, 1] * py + center[1]

    src = img.pixels.astype(np.float64)
    valid = (qx >= 0) & (qx <= w - 1) & (qy >= 0) & (qy <= h - 1)
    x0 = np.clip(np.floor(qx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(qy).astype(np.int64), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(qx - x0, 0.0, 1.0)
    fy = np.clip(qy - y0, 0.0, 1.0)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    out[~valid] = 0.0
    return out, valid.astype(np.float64)


def oracle_search(
    reference: GrayImage,
    moving: GrayImage,
    theta_range: float = 45.0,
    theta_step: float = 1.0,
    shift_range: int = 80,
    shift_step: int = 1,
) -> tuple[RigidTransform, float]:
    """Exhaustive grid search over rotations in [-theta_range, theta_range]
    and integer shifts in [-shift_range, shift_range]^2, maximizing the
    masked normalized cross-correlation of the transformed reference
    against the moving image over the valid overlap.

    Ties prefer the smaller (|theta|, |dx|, |dy|), then the negative side.
    Returns the winning transform and its correlation score.
    """
    if reference.shape != moving.shape:
        raise ValueError("reference and moving image dimensions must match")
    if theta_step <= 0 or shift_step < 1:
        raise ValueError("steps must be positive (shift_step >= 1 pixel)")
    thetas = np.arange(-theta_range, theta_range + theta_step / 2, theta_step)
    shifts = np.arange(-int(shift_range), int(shift_range) + 1, int(shift_step))
    if len(thetas) == 0 or len(shifts) == 0:
        raise ValueError("empty search grid")

    h, w = reference.height, reference.width
    pad_y = next_fast_len(h + int(shifts.max()) + 1)
    pad_x = next_fast_len(w + int(shifts.max()) + 1)
    pshape = (pad_y, pad_x)

    f = moving.pixels.astype(np.float64)
    fhat = rfft2(f, pshape)
    f2hat = rfft2(f * f, pshape)
    ones_hat = rfft2(np.ones((h, w)), pshape)

    sy = shifts[:, None] % pad_y
    sx = shifts[None, :] % pad_x
    n_total = float(h * w)

    best = None  # (-ncc, |theta|, |dx|, |dy|, theta, dx, dy)
    for theta in thetas:
        t_img, mask = _rotate_with_mask(reference, float(theta))
        m_hat = rfft2(mask, pshape)
        mt_hat = rfft2(mask * t_img, pshape)
        mt2_hat = rfft2(mask * t_img * t_img, pshape)

        def corr(g_hat, k_hat):
            return irfft2(g_hat * np.conj(k_hat), pshape)[sy, sx]

        n = corr(ones_hat, m_hat)
        s_f = corr(fhat, m_hat)
        s_t = corr(ones_hat, mt_hat)
        s_ft = corr(fhat, mt_hat)
        s_ff = corr(f2hat, m_hat)
        s_tt = corr(ones_hat, mt2_hat)

        with np.errstate(divide="ignore", invalid="ignore"):
            num = s_ft - s_f * s_t / n
            d1 = np.maximum(s_ff - s_f * s_f / n, 0.0)
            d2 = np.maximum(s_tt - s_t * s_t / n, 0.0)
            ncc = num / np.sqrt(d1 * d2)
        bad = (n < _MIN_OVERLAP * n_total) | (d1 < _MIN_VARIANCE) | (d2 < _MIN_VARIANCE)
        ncc[bad | ~np.isfinite(ncc)] = -np.inf

        peak = ncc.max()
        if peak == -np.inf:
            continue
        for flat in np.flatnonzero(ncc == peak):
            dy = float(shifts[flat // len(shifts)])
            dx = float(shifts[flat % len(shifts)])
            key = (-peak, abs(theta), abs(dx), abs(dy), theta, dx, dy)
            if best is None or key < best:
                best = key

    if best is None:
        raise ValueError("no grid point had a usable overlap")
    _, _, _, _, theta, dx, dy = best
    return RigidTransform(theta_deg=float(theta), dx=dx, dy=dy), float(-best[0])
