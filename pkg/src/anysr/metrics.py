"""PSNR and SSIM on the luma plane, following the super-resolution
convention: both metrics are computed on the 8-bit-scale Y channel."""

from __future__ import annotations

import numpy as np

from .imageops import Image, rgb_to_y

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def _y_plane_255(image: Image) -> np.ndarray:
    return rgb_to_y(image) * 255.0


def psnr_y(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB on Y; +inf for identical planes."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"dimension mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    mse = float(np.mean((_y_plane_255(a) - _y_plane_255(b)) ** 2))
    if mse == 0.0:
        return float("inf")
    return 20.0 * np.log10(DYNAMIC_RANGE / np.sqrt(mse))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim_y(a: Image, b: Image) -> float:
    """Single-scale SSIM on Y over valid (fully interior) 11x11 windows."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"dimension mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    ya, yb = _y_plane_255(a), _y_plane_255(b)
    window = _gaussian_window()

    def window_mean(plane):
        views = np.lib.stride_tricks.sliding_window_view(plane, (SSIM_WINDOW, SSIM_WINDOW))
        return np.einsum("ijkl,kl->ij", views, window)

    mu_a = window_mean(ya)
    mu_b = window_mean(yb)
    e_aa = window_mean(ya * ya)
    e_bb = window_mean(yb * yb)
    e_ab = window_mean(ya * yb)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b

    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    value = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(value.mean())
