"""Metric oracles: closed-form cases frozen from hand computation."""

import math

import numpy as np
import pytest

from mcsr import metrics
from mcsr.errors import ConfigError, ShapeError


class TestPsnr:
    def test_identical_images_sentinel(self):
        x = np.random.default_rng(0).random((16, 16))
        assert metrics.psnr(x, x) == math.inf

    def test_uniform_error_point_one_is_20db(self):
        gt = np.full((16, 16), 0.5)
        pred = gt + 0.1
        assert abs(metrics.psnr(pred, gt) - 20.0) < 1e-9

    def test_halving_error_adds_6db(self):
        rng = np.random.default_rng(1)
        gt = rng.random((16, 16))
        noise = rng.standard_normal((16, 16)) * 0.05
        base = metrics.psnr(gt + noise, gt)
        halved = metrics.psnr(gt + 0.5 * noise, gt)
        assert abs(halved - base - 20.0 * math.log10(2.0)) < 1e-9

    def test_monotone_in_mse(self):
        gt = np.zeros((8, 8))
        values = [metrics.psnr(gt + e, gt) for e in (0.05, 0.1, 0.2, 0.4)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            metrics.psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_identity_is_exactly_one(self):
        x = np.random.default_rng(2).random((32, 32))
        assert metrics.ssim(x, x) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a, b = rng.random((24, 24)), rng.random((24, 24))
        assert abs(metrics.ssim(a, b) - metrics.ssim(b, a)) < 1e-9

    def test_constant_images_closed_form(self):
        v1, v2 = 0.3, 0.8
        a, b = np.full((16, 16), v1), np.full((16, 16), v2)
        c1 = (metrics.SSIM_K1 * 1.0) ** 2
        expected = (2 * v1 * v2 + c1) / (v1**2 + v2**2 + c1)
        assert abs(metrics.ssim(a, b) - expected) < 1e-9

    def test_too_small_rejected(self):
        with pytest.raises(ConfigError):
            metrics.ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestNmse:
    def test_perfect_is_zero(self):
        gt = np.random.default_rng(4).random((8, 8))
        assert metrics.nmse(gt, gt) == 0.0

    def test_zero_prediction_is_one(self):
        gt = np.random.default_rng(5).random((8, 8))
        assert abs(metrics.nmse(np.zeros_like(gt), gt) - 1.0) < 1e-12

    def test_double_prediction_is_one(self):
        gt = np.random.default_rng(6).random((8, 8))
        assert abs(metrics.nmse(2.0 * gt, gt) - 1.0) < 1e-12

    def test_zero_gt_rejected(self):
        with pytest.raises(ConfigError):
            metrics.nmse(np.ones((4, 4)), np.zeros((4, 4)))


class TestPairedTTest:
    def test_identical_vectors(self):
        a = np.array([1.0, 2.0, 3.0])
        t, p = metrics.paired_t_test(a, a)
        assert t == 0.0 and p == 1.0

    def test_zero_variance_nonzero_mean(self):
        t, p = metrics.paired_t_test(np.array([2.0, 2.0, 2.0, 2.0]), np.ones(4))
        assert math.isinf(t) and t > 0
        assert p < 1e-12

    def test_five_sample_hand_computation(self):
        # differences [1.2, 0.8, 1.0, 1.1, 0.9]: mean 1.0, sd 0.1581,
        # t = 1.0 / (0.1581 / sqrt(5)) = 14.142
        b = np.zeros(5)
        a = np.array([1.2, 0.8, 1.0, 1.1, 0.9])
        t, p = metrics.paired_t_test(a, b)
        assert abs(t - 14.142135) < 1e-3
        assert p < 0.001

    def test_swap_negates_t_keeps_p(self):
        rng = np.random.default_rng(7)
        a, b = rng.random(10), rng.random(10)
        t1, p1 = metrics.paired_t_test(a, b)
        t2, p2 = metrics.paired_t_test(b, a)
        assert abs(t1 + t2) < 1e-12
        assert abs(p1 - p2) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            metrics.paired_t_test(np.ones(3), np.ones(4))

    def test_too_short(self):
        with pytest.raises(ConfigError):
            metrics.paired_t_test(np.ones(1), np.ones(1))


class TestErrorMap:
    def test_perfect_prediction_all_zero(self):
        x = np.random.default_rng(8).random((8, 8))
        np.testing.assert_array_equal(metrics.error_map(x, x), 0.0)

    def test_uniform_error_linear_scaling(self):
        gt = np.zeros((8, 8))
        np.testing.assert_allclose(metrics.error_map(gt + 0.1, gt, saturation=0.2), 0.5)

    def test_clamps_at_saturation(self):
        gt = np.zeros((8, 8))
        np.testing.assert_array_equal(metrics.error_map(gt + 0.5, gt, saturation=0.2), 1.0)


class TestPngExport:
    def test_round_trip_quantized(self, tmp_path):
        from PIL import Image

        img = np.linspace(0, 1, 64).reshape(8, 8)
        p = tmp_path / "img.png"
        metrics.save_png(p, img)
        back = np.asarray(Image.open(p), dtype=np.float64) / 255.0
        assert back.shape == (8, 8)
        assert np.max(np.abs(back - img)) <= 0.5 / 255.0 + 1e-9
