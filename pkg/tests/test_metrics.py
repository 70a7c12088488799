"""Tests for PSNR/SSIM on luma, against closed forms and brute-force oracles."""

import numpy as np
import pytest

from anysr.imageops import Image, rgb_to_y
from anysr.metrics import psnr_y, ssim_y


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def random_image(seed, h, w):
    return Image(rng_for(seed).uniform(0.0, 1.0, size=(h, w, 3)))


def gray_image(y_255, h, w):
    """Constant image whose 8-bit-scale luma equals y_255 (16..235)."""
    v = (y_255 - 16.0) / 219.0
    return Image(np.full((h, w, 3), v))


# -- oracles -------------------------------------------------------------


def oracle_psnr_y(a, b):
    """PSNR via explicit per-pixel summation."""
    ya = rgb_to_y(a) * 255.0
    yb = rgb_to_y(b) * 255.0
    total = 0.0
    for i in range(a.height):
        for j in range(a.width):
            total += (ya[i, j] - yb[i, j]) ** 2
    mse = total / (a.height * a.width)
    return 10.0 * np.log10(255.0 ** 2 / mse)


def oracle_ssim_y(a, b):
    """SSIM via an explicit sliding-window loop."""
    ya = rgb_to_y(a) * 255.0
    yb = rgb_to_y(b) * 255.0
    offs = np.arange(11) - 5.0
    g = np.exp(-(offs ** 2) / (2 * 1.5 ** 2))
    win = np.outer(g, g)
    win /= win.sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    values = []
    for i in range(a.height - 10):
        for j in range(a.width - 10):
            wa = ya[i:i + 11, j:j + 11]
            wb = yb[i:i + 11, j:j + 11]
            mu_a = (win * wa).sum()
            mu_b = (win * wb).sum()
            var_a = (win * wa * wa).sum() - mu_a ** 2
            var_b = (win * wb * wb).sum() - mu_b ** 2
            cov = (win * wa * wb).sum() - mu_a * mu_b
            values.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(values))


class TestPsnr:
    def test_identical_images_are_infinite(self):
        img = random_image(1, 8, 8)
        assert psnr_y(img, Image(img.pixels.copy())) == float("inf")

    def test_uniform_unit_error_closed_form(self):
        a = gray_image(103.6, 6, 6)
        b = gray_image(104.6, 6, 6)
        expected = 20.0 * np.log10(255.0)  # MSE exactly 1 on the 8-bit scale
        assert abs(psnr_y(a, b) - expected) < 1e-6
        assert abs(expected - 48.13080361) < 1e-6

    def test_matches_direct_summation_oracle(self):
        for seed in range(5):
            a = random_image(10 + seed, 9, 13)
            b = random_image(20 + seed, 9, 13)
            assert abs(psnr_y(a, b) - oracle_psnr_y(a, b)) < 1e-9

    def test_symmetric(self):
        a, b = random_image(30, 8, 8), random_image(31, 8, 8)
        assert psnr_y(a, b) == psnr_y(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            psnr_y(random_image(32, 4, 4), random_image(33, 4, 5))


class TestSsim:
    def test_identity_is_exactly_one(self):
        img = random_image(40, 16, 16)
        assert ssim_y(img, Image(img.pixels.copy())) == 1.0

    def test_constant_means_closed_form(self):
        a = gray_image(100.0, 12, 12)
        b = gray_image(110.0, 12, 12)
        c1 = (0.01 * 255) ** 2
        expected = (2 * 100.0 * 110.0 + c1) / (100.0 ** 2 + 110.0 ** 2 + c1)
        assert abs(ssim_y(a, b) - expected) < 1e-9
        assert abs(expected - 0.995477) < 1e-6

    def test_matches_sliding_window_oracle(self):
        for seed in range(3):
            a = random_image(50 + seed, 14, 17)
            b = random_image(60 + seed, 14, 17)
            assert abs(ssim_y(a, b) - oracle_ssim_y(a, b)) < 1e-9

    def test_symmetric(self):
        a, b = random_image(70, 12, 12), random_image(71, 12, 12)
        assert abs(ssim_y(a, b) - ssim_y(b, a)) < 1e-12

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="11"):
            ssim_y(random_image(72, 8, 8), random_image(73, 8, 8))

    def test_in_range(self):
        a, b = random_image(74, 16, 16), random_image(75, 16, 16)
        assert -1.0 <= ssim_y(a, b) <= 1.0
