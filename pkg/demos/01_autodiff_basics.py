"""
Reverse-mode differentiation on plain numpy arrays
==================================================

Build a tiny expression, run backward, and compare the result against a
hand-derived gradient and a finite-difference probe.
"""

import numpy as np

from refinery import autodiff as ad
from refinery.autodiff import Tensor

rng = np.random.default_rng(7)

# a Tensor wraps an ndarray; requires_grad opts it into the tape
w = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
x = Tensor(rng.standard_normal((5, 3)))

# y = mean(relu(x @ w)); every op records how to push gradients back
y = ad.mean(ad.relu(ad.matmul(x, w)))
print("loss value:", float(y.data))

ad.backward(y)
print("grad shape matches parameter:", w.grad.shape == w.data.shape)

# hand derivation: d mean / d pre = 1/N on the active entries, then x^T @ ...
pre = x.data @ w.data
upstream = (pre > 0).astype(pre.dtype) / pre.size
by_hand = x.data.T @ upstream
print("matches hand-derived gradient:", np.allclose(w.grad, by_hand, atol=1e-12))

# finite-difference probe of one coordinate
eps = 1e-6
probe = np.zeros_like(w.data)
probe[1, 2] = eps


def loss_at(delta):
    shifted = Tensor(w.data + delta)
    return float(ad.mean(ad.relu(ad.matmul(x, shifted))).data)


fd = (loss_at(probe) - loss_at(-probe)) / (2 * eps)
print(f"fd vs analytic at [1,2]: {fd:.8f} vs {w.grad[1, 2]:.8f}")

# gradients accumulate until cleared, which is what batching relies on
w.zero_grad()
ad.backward(ad.mean(ad.matmul(x, w)))
first = w.grad.copy()
ad.backward(ad.mean(ad.matmul(x, w)))
print("second backward doubled the grad:", np.allclose(w.grad, 2 * first))

# no_grad() turns recording off, so inference allocates no tape
with ad.no_grad():
    silent = ad.mean(ad.relu(ad.matmul(x, w)))
print("inside no_grad nothing to differentiate:", silent.requires_grad is False)
