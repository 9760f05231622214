"""Parameterized building blocks on top of the autodiff ops.

Layers discover their trainable tensors by walking attributes in insertion
order, which keeps parameter-tree iteration stable across runs.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import AttentionParams, Tensor


def fan_in_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    """Base container; subclasses assign Tensors / sub-Layers as attributes."""

    def named_params(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        """Every parameter tensor, frozen ones included; callers that only
        want trainable entries filter on ``requires_grad`` themselves."""
        out: list[tuple[str, Tensor]] = []
        for name, val in vars(self).items():
            if isinstance(val, Tensor):
                out.append((prefix + name, val))
            elif isinstance(val, Layer):
                out.extend(val.named_params(f"{prefix}{name}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Layer):
                        out.extend(item.named_params(f"{prefix}{name}.{i}."))
        return out


class Conv(Layer):
    def __init__(self, rng, k: int, cin: int, cout: int, stride: int = 1,
                 dtype=np.float32, zero_init: bool = False, bias_init: float = 0.0):
        if zero_init:
            w = np.zeros((k, k, cin, cout), dtype=dtype)
        else:
            w = fan_in_uniform(rng, (k, k, cin, cout), k * k * cin, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.full(cout, bias_init, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.padding = (k - 1) // 2

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Dense(Layer):
    """Affine map for (n, d_in) token matrices."""

    def __init__(self, rng, din: int, dout: int, dtype=np.float32,
                 zero_init: bool = False, bias_init: float = 0.0):
        if zero_init:
            w = np.zeros((din, dout), dtype=dtype)
        else:
            w = fan_in_uniform(rng, (din, dout), din, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.full(dout, bias_init, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.linear(x, self.weight, self.bias)


class VecDense(Layer):
    """Affine map for a single 1D vector (the prior pathway)."""

    def __init__(self, rng, din: int, dout: int, dtype=np.float32,
                 zero_init: bool = False, bias_init: float = 0.0):
        if zero_init:
            w = np.zeros((dout, din), dtype=dtype)
        else:
            w = fan_in_uniform(rng, (dout, din), din, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.full(dout, bias_init, dtype=dtype), requires_grad=True)

    def __call__(self, v: Tensor) -> Tensor:
        return ad.add(ad.matvec(self.weight, v), self.bias)


class SelfAttentionBlock(Layer):
    """Single-head self-attention over (n, d) tokens with residual output."""

    def __init__(self, rng, d: int, dtype=np.float32):
        def dense_pair():
            return (Tensor(fan_in_uniform(rng, (d, d), d, dtype), requires_grad=True),
                    Tensor(np.zeros(d, dtype=dtype), requires_grad=True))

        self.wq, self.bq = dense_pair()
        self.wk, self.bk = dense_pair()
        self.wv, self.bv = dense_pair()
        self.wo, self.bo = dense_pair()

    def params(self) -> AttentionParams:
        return AttentionParams(self.wq, self.bq, self.wk, self.bk,
                               self.wv, self.bv, self.wo, self.bo)

    def __call__(self, x: Tensor, return_weights: bool = False):
        return ad.self_attention(x, self.params(), return_weights=return_weights)


def coordinate_map(h: int, w: int, dtype=np.float32) -> np.ndarray:
    """(h, w, 2) of (x, y) positions mapped linearly onto [-1, 1].

    Corner entries are exact; a 1-wide axis maps to -1.
    """
    xs = np.linspace(-1.0, 1.0, w, dtype=dtype) if w > 1 else np.full(w, -1.0, dtype=dtype)
    ys = np.linspace(-1.0, 1.0, h, dtype=dtype) if h > 1 else np.full(h, -1.0, dtype=dtype)
    grid = np.empty((h, w, 2), dtype=dtype)
    grid[:, :, 0] = xs[None, :]
    grid[:, :, 1] = ys[:, None]
    return grid


class PositionEmbedding(Layer):
    """Two-layer per-location perceptron over the normalized coordinate map.

    The output layer starts at zero so a fresh embedding is a no-op and only
    grows as far as the loss actually pulls it.
    """

    def __init__(self, rng, channels: int, dtype=np.float32):
        self.lin0 = Dense(rng, 2, channels, dtype)
        self.lin1 = Dense(rng, channels, channels, dtype, zero_init=True)
        self.dtype = dtype

    def __call__(self, h: int, w: int) -> Tensor:
        coords = Tensor(coordinate_map(h, w, self.dtype).reshape(h * w, 2))
        hidden = ad.tanh(self.lin0(coords))
        return ad.unflatten_spatial(self.lin1(hidden), h, w)


class ResidualBlock(Layer):
    """conv -> relu -> conv with identity skip; receptive field 5x5."""

    def __init__(self, rng, channels: int, dtype=np.float32):
        self.conv0 = Conv(rng, 3, channels, channels, dtype=dtype)
        self.conv1 = Conv(rng, 3, channels, channels, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(x, self.conv1(ad.relu(self.conv0(x))))
