"""PSNR and SSIM for [0, 1] images, plus the aggregate report type.

PSNR uses a 99.0 dB sentinel for the infinite (identical images) case only;
all finite values are reported as computed. SSIM follows the standard
windowed definition: luminance-weighted grayscale, 11x11 Gaussian window
with sigma 1.5, K1=0.01 / K2=0.03 at dynamic range 1, averaged over valid
window positions only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ShapeError

PSNR_SENTINEL = 99.0

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)
_WINDOW_SIZE = 11
_WINDOW_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"metric operands differ in shape: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[2] != 3:
        raise ShapeError(f"metrics expect (H, W, 3) images, got {a.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, max_val: float = 1.0) -> float:
    a, b = _check_pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return PSNR_SENTINEL
    return float(10.0 * np.log10(max_val * max_val / mse))


def _gaussian_window() -> np.ndarray:
    half = (_WINDOW_SIZE - 1) // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords ** 2) / (2.0 * _WINDOW_SIGMA ** 2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _gaussian_window()


def _filter_valid(img: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, (_WINDOW_SIZE, _WINDOW_SIZE))
    return np.tensordot(view, _WINDOW, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _check_pair(a, b)
    if a.shape[0] < _WINDOW_SIZE or a.shape[1] < _WINDOW_SIZE:
        raise InputError(f"ssim: image {a.shape[:2]} smaller than the {_WINDOW_SIZE}x{_WINDOW_SIZE} window")
    x = a @ _LUMA
    y = b @ _LUMA

    mu_x = _filter_valid(x)
    mu_y = _filter_valid(y)
    # identical expressions on both operands so ssim(x, x) is exactly 1.0
    sigma_x = _filter_valid(x * x) - mu_x * mu_x
    sigma_y = _filter_valid(y * y) - mu_y * mu_y
    sigma_xy = _filter_valid(x * y) - mu_x * mu_y

    c1 = (_K1 * 1.0) ** 2
    c2 = (_K2 * 1.0) ** 2
    num = (2.0 * (mu_x * mu_y) + c1) * (2.0 * sigma_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    """Per-image metric values plus their means over the evaluated set."""
    per_image_psnr: list = field(default_factory=list)
    per_image_ssim: list = field(default_factory=list)

    @property
    def psnr_db(self) -> float:
        if not self.per_image_psnr:
            raise InputError("empty metric report")
        return float(np.mean(self.per_image_psnr))

    @property
    def ssim(self) -> float:
        if not self.per_image_ssim:
            raise InputError("empty metric report")
        return float(np.mean(self.per_image_ssim))

    def add(self, psnr_value: float, ssim_value: float) -> None:
        self.per_image_psnr.append(float(psnr_value))
        self.per_image_ssim.append(float(ssim_value))
