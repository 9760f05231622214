"""Synthetic image degradations and the samplers that draw their parameters.

Three corruption families are supported: low-light (gamma curve, brightness
scale, additive sensor noise), plain additive Gaussian noise, and Gaussian
blur. Each call is a pure function of (clean image, spec), so a fixed seed
reproduces the exact degraded bytes.

``degrade`` validates against broad physical bounds; the narrower ranges in
``sample_spec`` are what the toy data generator draws from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, InputError

KINDS = ("lowlight", "gaussian_noise", "gaussian_blur")

# broad validity bounds per parameter; the sampler stays well inside them
_BOUNDS = {
    "lowlight": {"gamma": (0.0, 8.0), "scale": (0.0, 1.5), "sigma": (-1e-12, 0.5)},
    "gaussian_noise": {"sigma": (-1e-12, 0.5)},
    "gaussian_blur": {"sigma": (0.0, 8.0)},
}

# ranges the toy dataset generator samples per image
SAMPLE_RANGES = {
    "lowlight": {"gamma": (1.5, 3.0), "scale": (0.1, 0.5), "sigma": (0.0, 0.1)},
    "gaussian_noise": {"sigma": (0.02, 0.1)},
    "gaussian_blur": {"sigma": (0.6, 1.6)},
}


@dataclass(frozen=True)
class DegradationSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown degradation kind {self.kind!r}, expected one of {KINDS}")
        bounds = _BOUNDS[self.kind]
        missing = set(bounds) - set(self.params)
        if missing:
            raise ConfigError(f"{self.kind}: missing parameters {sorted(missing)}")
        extra = set(self.params) - set(bounds)
        if extra:
            raise ConfigError(f"{self.kind}: unknown parameters {sorted(extra)}")
        for name, (lo, hi) in bounds.items():
            v = float(self.params[name])
            if not (lo < v <= hi) or not math.isfinite(v):
                raise ConfigError(f"{self.kind}: parameter {name}={v} outside ({lo}, {hi}]")


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    taps = np.exp(-np.arange(-radius, radius + 1, dtype=np.float64) ** 2 / (2.0 * sigma * sigma))
    taps = (taps / taps.sum()).astype(np.float32)
    # "mirror" is numpy's reflect: the edge sample is not repeated
    out = ndimage.correlate1d(img, taps, axis=0, mode="mirror")
    return ndimage.correlate1d(out, taps, axis=1, mode="mirror")


def degrade(clean: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply one corruption to a [0, 1] image; output is clamped to [0, 1]."""
    spec.validate()
    img = np.asarray(clean, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"degrade: expected an (H, W, 3) image, got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise InputError("degrade: clean image has values outside [0, 1]")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(spec.seed))))
    p = {k: float(v) for k, v in spec.params.items()}
    if spec.kind == "lowlight":
        out = np.power(img, np.float32(p["gamma"])) * np.float32(p["scale"])
        if p["sigma"] > 0.0:
            out = out + rng.standard_normal(img.shape, dtype=np.float32) * np.float32(p["sigma"])
    elif spec.kind == "gaussian_noise":
        out = img
        if p["sigma"] > 0.0:
            out = out + rng.standard_normal(img.shape, dtype=np.float32) * np.float32(p["sigma"])
    else:
        out = _gaussian_blur(img, p["sigma"])
    return np.clip(out, 0.0, 1.0)


def sample_spec(kind: str, rng: np.random.Generator) -> DegradationSpec:
    """Draw one concrete spec from the per-kind sampling ranges."""
    if kind not in KINDS:
        raise ConfigError(f"unknown degradation kind {kind!r}, expected one of {KINDS}")
    params = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in
              sorted(SAMPLE_RANGES[kind].items())}
    return DegradationSpec(kind=kind, params=params, seed=int(rng.integers(0, 2 ** 31)))
