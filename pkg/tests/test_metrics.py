"""PSNR/SSIM reference values, invariances, and the aggregate report."""

import numpy as np
import pytest

from refinery.errors import InputError, ShapeError
from refinery.metrics import PSNR_SENTINEL, MetricReport, psnr, ssim


def rng_for(tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([20240607, tag])))


def toy_image(tag: int, size: int = 32) -> np.ndarray:
    return rng_for(tag).uniform(0, 1, (size, size, 3)).astype(np.float32)


class TestPsnr:
    def test_half_range_offset_reference_value(self):
        a = np.zeros((16, 16, 3), dtype=np.float32)
        b = np.full((16, 16, 3), 0.5, dtype=np.float32)
        assert abs(psnr(a, b) - 6.0206) < 1e-3

    def test_tenth_offset_reference_value(self):
        a = np.full((16, 16, 3), 0.25, dtype=np.float64)
        b = np.full((16, 16, 3), 0.35, dtype=np.float64)
        assert abs(psnr(a, b) - 20.0) < 1e-6

    def test_matches_direct_formula(self):
        a, b = toy_image(1), toy_image(2)
        mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
        assert abs(psnr(a, b) - 10.0 * np.log10(1.0 / mse)) < 1e-9

    def test_sentinel_only_for_identical(self):
        a = toy_image(3)
        assert psnr(a, a.copy()) == PSNR_SENTINEL
        b = a.copy()
        b[0, 0, 0] += 1e-3
        assert psnr(a, b) != PSNR_SENTINEL

    def test_large_true_values_not_capped(self):
        a = toy_image(4)
        b = a + np.float32(1e-6)
        assert psnr(a, np.clip(b, 0, 1)) > PSNR_SENTINEL

    def test_monotone_in_noise_level(self):
        a = toy_image(5)
        rng = rng_for(6)
        noise = rng.standard_normal(a.shape)
        values = [psnr(a, np.clip(a + s * noise, 0, 1)) for s in (0.01, 0.05, 0.1)]
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        for tag in range(3):
            a = toy_image(10 + tag)
            assert ssim(a, a.copy()) == 1.0

    def test_symmetry(self):
        a, b = toy_image(13), toy_image(14)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-9

    def test_monotone_in_noise_level(self):
        a = toy_image(15, size=48)
        rng = rng_for(16)
        noise = rng.standard_normal(a.shape)
        values = [ssim(a, np.clip(a + s * noise, 0, 1)) for s in (0.01, 0.05, 0.1)]
        assert 1.0 > values[0] > values[1] > values[2]

    def test_bounded(self):
        a = rng_for(17).uniform(0, 1, (24, 24, 3))
        b = 1.0 - a   # anticorrelated
        v = ssim(a, b)
        assert -1.0 <= v < 1.0

    def test_rejects_images_smaller_than_window(self):
        small = np.zeros((8, 8, 3))
        with pytest.raises(InputError, match="11"):
            ssim(small, small)

    def test_constant_shift_reduces_similarity(self):
        a = toy_image(18)
        assert ssim(a, np.clip(a + 0.2, 0, 1)) < 1.0


class TestMetricReport:
    def test_means_over_added_pairs(self):
        r = MetricReport()
        r.add(30.0, 0.9)
        r.add(34.0, 0.7)
        assert r.psnr_db == 32.0
        assert abs(r.ssim - 0.8) < 1e-12
        assert len(r.per_image_psnr) == 2

    def test_empty_report_rejected(self):
        r = MetricReport()
        with pytest.raises(InputError, match="empty"):
            _ = r.psnr_db
