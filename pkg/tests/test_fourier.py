"""Degradation simulator: analytic cases, brute-force DFT oracle, invariants."""

import numpy as np
import pytest

from mcsr import fourier
from mcsr.errors import ConfigError, NumericError, ShapeError


def brute_force_dft2c(x):
    """O(N^2)-per-coefficient centered orthonormal DFT, the independent oracle."""
    x = np.asarray(x, dtype=float)
    h, w = x.shape
    y = np.fft.ifftshift(x)
    k = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            acc = 0.0 + 0.0j
            for m in range(h):
                for n in range(w):
                    acc += y[m, n] * np.exp(-2j * np.pi * (u * m / h + v * n / w))
            k[u, v] = acc / np.sqrt(h * w)
    return np.fft.fftshift(k)


def brute_force_idft2c_real(k):
    """Inverse of the oracle above; returns the real part."""
    k = np.asarray(k, dtype=complex)
    h, w = k.shape
    ku = np.fft.ifftshift(k)
    img = np.zeros((h, w), dtype=complex)
    for m in range(h):
        for n in range(w):
            acc = 0.0 + 0.0j
            for u in range(h):
                for v in range(w):
                    acc += ku[u, v] * np.exp(2j * np.pi * (u * m / h + v * n / w))
            img[m, n] = acc / np.sqrt(h * w)
    return np.fft.fftshift(img).real


def brute_force_degrade(x, s):
    """Independent degrade: oracle DFT, explicit central crop, oracle inverse."""
    k = brute_force_dft2c(x)
    h, w = k.shape
    h2, w2 = h // s, w // s
    r0, c0 = h // 2 - h2 // 2, w // 2 - w2 // 2
    return brute_force_idft2c_real(k[r0 : r0 + h2, c0 : c0 + w2] / s)


class TestFft2c:
    def test_constant_image_all_energy_in_dc(self):
        c = 0.63
        k = fourier.fft2c(np.full((4, 4), c))
        expected = np.zeros((4, 4), dtype=complex)
        expected[2, 2] = c * 4.0  # c * sqrt(H*W)
        np.testing.assert_allclose(k, expected, atol=1e-12)

    def test_single_pixel_identity(self):
        k = fourier.fft2c(np.array([[2.5]]))
        np.testing.assert_allclose(k, np.array([[2.5 + 0j]]))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.random((8, 8))
        np.testing.assert_allclose(fourier.fft2c(x), brute_force_dft2c(x), atol=1e-10)

    def test_parseval(self):
        rng = np.random.default_rng(11)
        x = rng.random((8, 8))
        k = fourier.fft2c(x)
        img_energy = np.sum(x**2)
        k_energy = np.sum(np.abs(k) ** 2)
        assert abs(k_energy - img_energy) / img_energy < 1e-4

    def test_rejects_non_finite(self):
        x = np.zeros((4, 4))
        x[1, 2] = np.nan
        with pytest.raises(NumericError):
            fourier.fft2c(x)
        x[1, 2] = np.inf
        with pytest.raises(NumericError):
            fourier.fft2c(x)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ShapeError):
            fourier.fft2c(np.zeros((2, 2, 2)))


class TestIfft2c:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        x = rng.random((16, 16))
        back = fourier.ifft2c(fourier.fft2c(x))
        assert np.max(np.abs(back - x)) < 1e-5

    def test_zero_grid(self):
        np.testing.assert_array_equal(fourier.ifft2c(np.zeros((4, 6), complex)), np.zeros((4, 6)))

    def test_dc_only_grid_gives_constant(self):
        c = 0.41
        k = np.zeros((8, 8), dtype=complex)
        k[4, 4] = np.sqrt(64) * c
        np.testing.assert_allclose(fourier.ifft2c(k), np.full((8, 8), c), atol=1e-12)

    def test_non_hermitian_grid_rejected_by_default(self):
        rng = np.random.default_rng(5)
        k = rng.random((8, 8)) + 1j * rng.random((8, 8))
        with pytest.raises(NumericError):
            fourier.ifft2c(k)
        # opting out returns the real part without complaint
        fourier.ifft2c(k, check_hermitian=False)


class TestTruncateCenter:
    def test_identity_at_scale_one(self):
        rng = np.random.default_rng(2)
        k = rng.random((4, 4)) + 1j * rng.random((4, 4))
        np.testing.assert_array_equal(fourier.truncate_center(k, 1), k)

    def test_central_block_slicing(self):
        k = np.arange(16, dtype=complex).reshape(4, 4)
        out = fourier.truncate_center(k, 2)
        np.testing.assert_allclose(out, k[1:3, 1:3] / 2)

    def test_dc_only_grid_scales_dc(self):
        k = np.zeros((8, 8), dtype=complex)
        k[4, 4] = 3.0
        out = fourier.truncate_center(k, 2)
        expected = np.zeros((4, 4), dtype=complex)
        expected[2, 2] = 1.5
        np.testing.assert_allclose(out, expected)

    def test_non_divisible_scale_rejected(self):
        with pytest.raises(ConfigError):
            fourier.truncate_center(np.zeros((6, 6), complex), 4)
        with pytest.raises(ConfigError):
            fourier.truncate_center(np.zeros((8, 8), complex), 0)


class TestDegrade:
    def test_scale_one_is_identity(self):
        rng = np.random.default_rng(13)
        x = rng.random((8, 8))
        assert np.max(np.abs(fourier.degrade(x, 1) - x)) < 1e-5

    def test_constant_preserved(self):
        lr = fourier.degrade(np.full((8, 8), 0.77), 2)
        assert lr.shape == (4, 4)
        assert np.max(np.abs(lr - 0.77)) < 1e-5

    def test_centered_impulse_matches_oracle(self):
        x = np.zeros((8, 8))
        x[4, 4] = 1.0
        np.testing.assert_allclose(fourier.degrade(x, 2), brute_force_degrade(x, 2), atol=1e-5)

    def test_random_images_match_oracle(self):
        rng = np.random.default_rng(17)
        for s in (1, 2, 4):
            x = rng.random((8, 8))
            np.testing.assert_allclose(fourier.degrade(x, s), brute_force_degrade(x, s), atol=1e-5)

    def test_linearity(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            x, y = rng.random((16, 16)), rng.random((16, 16))
            a, b = rng.uniform(-2, 2, size=2)
            lhs = fourier.degrade(a * x + b * y, 2)
            rhs = a * fourier.degrade(x, 2) + b * fourier.degrade(y, 2)
            scale = max(np.max(np.abs(lhs)), 1e-12)
            assert np.max(np.abs(lhs - rhs)) / scale < 1e-4

    def test_mean_preserved(self):
        rng = np.random.default_rng(23)
        for s in (2, 4):
            x = rng.random((32, 32)) + 0.1
            lr = fourier.degrade(x, s)
            assert abs(lr.mean() - x.mean()) / abs(x.mean()) < 1e-4


class TestZeroFillUpsample:
    def test_output_is_real_and_right_size(self):
        rng = np.random.default_rng(29)
        lr = rng.random((8, 8))
        up = fourier.zero_fill_upsample(lr, 2)
        assert up.shape == (16, 16)
        assert np.isrealobj(up)

    def test_constant_preserved(self):
        up = fourier.zero_fill_upsample(np.full((4, 4), 0.3), 2)
        np.testing.assert_allclose(up, 0.3, atol=1e-12)

    def test_low_pass_idempotence_band_limited(self):
        # Plain-slicing truncation keeps an asymmetric Nyquist band, so exact
        # idempotence needs content clear of that band; test with such images.
        rng = np.random.default_rng(31)
        h = w = 64
        s = 2
        k = fourier.fft2c(rng.random((h, w)))
        mask = np.zeros((h, w))
        lo_r, lo_c = h // 2 - h // (2 * s) + 1, w // 2 - w // (2 * s) + 1
        hi_r, hi_c = h // 2 + h // (2 * s) - 1, w // 2 + w // (2 * s) - 1
        mask[lo_r:hi_r, lo_c:hi_c] = 1.0
        x = fourier.ifft2c(k * mask, check_hermitian=False)
        lr = fourier.degrade(x, s)
        lr_again = fourier.degrade(fourier.zero_fill_upsample(lr, s), s)
        assert np.max(np.abs(lr_again - lr)) < 1e-4

    def test_low_pass_idempotence_gaussian_blob(self):
        yy, xx = np.mgrid[:64, :64]
        x = np.exp(-((xx - 30.0) ** 2 + (yy - 36.0) ** 2) / (2 * 5.0**2))
        lr = fourier.degrade(x, 2)
        lr_again = fourier.degrade(fourier.zero_fill_upsample(lr, 2), 2)
        assert np.max(np.abs(lr_again - lr)) < 1e-4
