"""A deliberately small restoration network used as the stage-one model.

The refiner is baseline-agnostic; anything mapping a degraded image to a
restored one works. This three-layer residual CNN is enough to learn the
desk-scale degradations while keeping joint training fast on a CPU.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InputError
from .layers import Conv, Layer


class BaselineRestorer(Layer):
    """conv-relu, conv-relu, zero-init conv, all added back onto the input."""

    def __init__(self, rng: np.random.Generator, width: int = 16, dtype=np.float32):
        self.conv0 = Conv(rng, 3, 3, width, dtype=dtype)
        self.conv1 = Conv(rng, 3, width, width, dtype=dtype)
        # zero last layer: a fresh restorer is the identity, so early refiner
        # updates see sane inputs instead of conv noise
        self.conv2 = Conv(rng, 3, width, 3, dtype=dtype, zero_init=True)

    def __call__(self, i_d: Tensor) -> Tensor:
        if i_d.data.ndim != 3 or i_d.shape[2] != 3:
            raise InputError(f"restore: expected an (H, W, 3) image, got {i_d.shape}")
        x = ad.relu(self.conv0(i_d))
        x = ad.relu(self.conv1(x))
        return ad.add(i_d, self.conv2(x))
