"""Synthetic degradations: reference values, determinism, validation."""

import numpy as np
import pytest

from refinery.degrade import (KINDS, SAMPLE_RANGES, DegradationSpec, degrade,
                              sample_spec)
from refinery.errors import ConfigError, InputError


def rng_for(tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([20240606, tag])))


def toy_image(tag: int, size: int = 16) -> np.ndarray:
    return rng_for(tag).uniform(0, 1, (size, size, 3)).astype(np.float32)


class TestReferenceValues:
    def test_lowlight_identity_parameters(self):
        img = toy_image(1)
        spec = DegradationSpec("lowlight", {"gamma": 1.0, "scale": 1.0, "sigma": 0.0})
        np.testing.assert_allclose(degrade(img, spec), img, atol=1e-6)

    def test_lowlight_on_constant_white(self):
        img = np.ones((8, 8, 3), dtype=np.float32)
        spec = DegradationSpec("lowlight", {"gamma": 2.0, "scale": 0.3, "sigma": 0.0})
        np.testing.assert_allclose(degrade(img, spec), 0.3, atol=1e-6)

    def test_lowlight_gamma_darkens_midtones(self):
        img = np.full((8, 8, 3), 0.5, dtype=np.float32)
        spec = DegradationSpec("lowlight", {"gamma": 2.0, "scale": 1.0, "sigma": 0.0})
        np.testing.assert_allclose(degrade(img, spec), 0.25, atol=1e-6)

    def test_noise_sigma_zero_is_identity(self):
        img = toy_image(2)
        spec = DegradationSpec("gaussian_noise", {"sigma": 0.0})
        assert np.array_equal(degrade(img, spec), img)

    def test_noise_statistics_match_sigma(self):
        img = np.full((64, 64, 3), 0.5, dtype=np.float32)
        spec = DegradationSpec("gaussian_noise", {"sigma": 0.05}, seed=3)
        noisy = degrade(img, spec)
        assert abs(float(np.std(noisy - img)) - 0.05) < 0.005

    def test_blur_keeps_constant_image(self):
        img = np.full((16, 16, 3), 0.7, dtype=np.float32)
        spec = DegradationSpec("gaussian_blur", {"sigma": 1.2})
        np.testing.assert_allclose(degrade(img, spec), 0.7, atol=1e-5)

    def test_blur_mass_preserved_on_interior_delta(self):
        img = np.zeros((17, 17, 3), dtype=np.float32)
        img[8, 8, :] = 1.0
        out = degrade(img, DegradationSpec("gaussian_blur", {"sigma": 1.0}))
        np.testing.assert_allclose(out.sum(axis=(0, 1)), 1.0, atol=1e-4)
        assert out[8, 8, 0] < 1.0 and out[8, 8, 0] > out[8, 4, 0]

    def test_blur_is_separably_symmetric(self):
        img = toy_image(4)
        sym = 0.5 * (img + img[::-1, :, :])
        out = degrade(sym, DegradationSpec("gaussian_blur", {"sigma": 1.0}))
        np.testing.assert_allclose(out, out[::-1, :, :], atol=1e-6)

    def test_output_always_clamped(self):
        img = toy_image(5)
        spec = DegradationSpec("gaussian_noise", {"sigma": 0.5}, seed=9)
        out = degrade(img, spec)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestDeterminism:
    def test_same_seed_same_noise(self):
        img = toy_image(6)
        a = degrade(img, DegradationSpec("gaussian_noise", {"sigma": 0.1}, seed=42))
        b = degrade(img, DegradationSpec("gaussian_noise", {"sigma": 0.1}, seed=42))
        assert np.array_equal(a, b)

    def test_different_seed_different_noise(self):
        img = toy_image(7)
        a = degrade(img, DegradationSpec("gaussian_noise", {"sigma": 0.1}, seed=42))
        b = degrade(img, DegradationSpec("gaussian_noise", {"sigma": 0.1}, seed=43))
        assert not np.array_equal(a, b)

    def test_sample_spec_within_ranges_and_reproducible(self):
        for kind in KINDS:
            a = sample_spec(kind, rng_for(8))
            b = sample_spec(kind, rng_for(8))
            assert a == b
            a.validate()
            for name, (lo, hi) in SAMPLE_RANGES[kind].items():
                assert lo <= a.params[name] <= hi


class TestValidation:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown degradation kind"):
            DegradationSpec("sepia", {}).validate()

    def test_missing_parameter(self):
        with pytest.raises(ConfigError, match="missing"):
            DegradationSpec("lowlight", {"gamma": 2.0}).validate()

    def test_unknown_parameter(self):
        with pytest.raises(ConfigError, match="unknown parameters"):
            DegradationSpec("gaussian_noise", {"sigma": 0.1, "bias": 1.0}).validate()

    def test_out_of_bounds_parameter(self):
        with pytest.raises(ConfigError, match="outside"):
            DegradationSpec("lowlight", {"gamma": 0.0, "scale": 1.0, "sigma": 0.0}).validate()
        with pytest.raises(ConfigError, match="outside"):
            DegradationSpec("gaussian_noise", {"sigma": 0.7}).validate()

    def test_wrong_image_shape(self):
        with pytest.raises(InputError, match="H, W, 3"):
            degrade(np.zeros((8, 8), dtype=np.float32),
                    DegradationSpec("gaussian_noise", {"sigma": 0.1}))

    def test_out_of_range_image(self):
        with pytest.raises(InputError, match="outside"):
            degrade(np.full((4, 4, 3), 1.5, dtype=np.float32),
                    DegradationSpec("gaussian_noise", {"sigma": 0.1}))
