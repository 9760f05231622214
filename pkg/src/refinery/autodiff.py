"""Dense-tensor engine with reverse-mode automatic differentiation.

Tensors wrap channels-last, row-major numpy arrays (float32 for training,
float64 for gradient checking). Every operation records its inputs and a
backward closure on the output tensor, so each forward pass builds its own
tape; :func:`backward` replays it once in reverse topological order and then
releases it. There is no global state.

Broadcasting is deliberately restricted: scalar*tensor, per-channel bias,
and the explicit ``tile_*`` ops. Everything else requires exact shapes so
that shape bugs surface at op boundaries.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GraphError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Suspend tape recording; results inside carry no graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """N-dimensional real array with an optional gradient slot.

    ``grad`` is populated (and accumulated) by :func:`backward` for every
    tensor with ``requires_grad=True`` that the loss depends on.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_released")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self._released = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap an op result, recording the tape node when gradients are needed."""
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_same_dtype(*tensors: Tensor) -> None:
    dts = {t.dtype for t in tensors}
    if len(dts) > 1:
        raise GraphError(f"mixed dtypes in one op: {sorted(str(d) for d in dts)}")


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        for axis, (da, db) in enumerate(zip(a.shape, b.shape)):
            if da != db:
                raise ShapeError(f"{op}: axis {axis} differs ({da} vs {db})")
        raise ShapeError(f"{op}: rank mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise suite
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_same_shape(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_same_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_same_shape(a, b, "mul")
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scalar_mul(a: Tensor, s: float) -> Tensor:
    s = a.dtype.type(s)
    return _result(a.data * s, (a,), lambda g: (g * s,))


def scalar_add(a: Tensor, s: float) -> Tensor:
    return _result(a.data + a.dtype.type(s), (a,), lambda g: (g,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign so exp never overflows
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x)))).astype(x.dtype)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0)
    return _result(y, (a,), lambda g: (g * (a.data > 0),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def absolute(a: Tensor) -> Tensor:
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def tensor_sum(a: Tensor) -> Tensor:
    return _result(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.dtype.type(a.data.size)
    return _result(a.data.mean(), (a,),
                   lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last (channel) axis; spatial dims must agree."""
    if len(parts) < 2:
        raise ShapeError("concat_channels: need at least two tensors")
    _check_same_dtype(*parts)
    lead = parts[0].shape[:-1]
    for i, p in enumerate(parts[1:], start=1):
        if p.shape[:-1] != lead:
            raise ShapeError(f"concat_channels: operand {i} leading dims {p.shape[:-1]} != {lead}")
    widths = [p.shape[-1] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=-1))

    return _result(np.concatenate([p.data for p in parts], axis=-1), tuple(parts), bwd)


def global_avg_pool(a: Tensor) -> Tensor:
    """(h, w, c) -> (c,) mean over spatial positions."""
    if a.data.ndim != 3:
        raise ShapeError(f"global_avg_pool: expected rank 3, got {a.shape}")
    h, w, _ = a.shape
    n = a.dtype.type(h * w)
    return _result(a.data.mean(axis=(0, 1)), (a,),
                   lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def tile_spatial(v: Tensor, h: int, w: int) -> Tensor:
    """(c,) -> (h, w, c) by uniform tiling. Gradient sums over positions."""
    if v.data.ndim != 1:
        raise ShapeError(f"tile_spatial: expected rank 1, got {v.shape}")
    out = np.broadcast_to(v.data, (h, w, v.shape[0])).copy()
    return _result(out, (v,), lambda g: (g.sum(axis=(0, 1)),))


def tile_channels(m: Tensor, c: int) -> Tensor:
    """(h, w, 1) -> (h, w, c) by channel tiling. Gradient sums over channels."""
    if m.data.ndim != 3 or m.shape[-1] != 1:
        raise ShapeError(f"tile_channels: expected (h, w, 1), got {m.shape}")
    out = np.broadcast_to(m.data, m.shape[:2] + (c,)).copy()
    return _result(out, (m,), lambda g: (g.sum(axis=-1, keepdims=True),))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expected rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: axis 1 of left ({a.shape[1]}) != axis 0 of right ({b.shape[0]})")
    return _result(a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g))


def transpose2d(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose2d: expected rank 2, got {a.shape}")
    return _result(a.data.T.copy(), (a,), lambda g: (g.T.copy(),))


def matvec(w: Tensor, v: Tensor) -> Tensor:
    """(m, n) @ (n,) -> (m,)."""
    _check_same_dtype(w, v)
    if w.data.ndim != 2 or v.data.ndim != 1:
        raise ShapeError(f"matvec: expected (m,n) and (n,), got {w.shape} and {v.shape}")
    if w.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: axis 1 of matrix ({w.shape[1]}) != vector length ({v.shape[0]})")
    return _result(w.data @ v.data, (w, v),
                   lambda g: (np.outer(g, v.data), w.data.T @ g))


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Row-wise affine map: (n, d_in) @ (d_in, d_out) + (d_out,)."""
    _check_same_dtype(x, weight, bias)
    if x.data.ndim != 2:
        raise ShapeError(f"linear: expected rank-2 input, got {x.shape}")
    if weight.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: input width {x.shape[1]} != weight rows {weight.shape[0]}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"linear: bias shape {bias.shape} != ({weight.shape[1]},)")
    return _result(x.data @ weight.data + bias.data, (x, weight, bias),
                   lambda g: (g @ weight.data.T, x.data.T @ g, g.sum(axis=0)))


def softmax_rows(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows: expected rank 2, got {a.shape}")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        return ((g - inner) * y,)

    return _result(y, (a,), bwd)


def flatten_spatial(a: Tensor) -> Tensor:
    """(h, w, c) -> (h*w, c) in row-major order."""
    if a.data.ndim != 3:
        raise ShapeError(f"flatten_spatial: expected rank 3, got {a.shape}")
    h, w, c = a.shape
    return _result(a.data.reshape(h * w, c), (a,), lambda g: (g.reshape(h, w, c),))


def unflatten_spatial(a: Tensor, h: int, w: int) -> Tensor:
    if a.data.ndim != 2 or a.shape[0] != h * w:
        raise ShapeError(f"unflatten_spatial: cannot reshape {a.shape} to ({h}, {w}, -1)")
    c = a.shape[1]
    return _result(a.data.reshape(h, w, c), (a,), lambda g: (g.reshape(h * w, c),))


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _conv_patches(padded: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Strided (h', w', c, k, k) view of all receptive fields."""
    view = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    return view[::stride, ::stride]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (h, w, c_in) with (k, k, c_in, c_out) filters."""
    _check_same_dtype(x, weight, bias)
    if x.data.ndim != 3:
        raise ShapeError(f"conv2d: expected rank-3 input, got {x.shape}")
    if weight.data.ndim != 4 or weight.shape[0] != weight.shape[1]:
        raise ShapeError(f"conv2d: expected (k, k, c_in, c_out) weight, got {weight.shape}")
    k = weight.shape[0]
    if k % 2 == 0:
        raise ShapeError(f"conv2d: kernel size must be odd, got {k}")
    h, w, cin = x.shape
    if weight.shape[2] != cin:
        raise ShapeError(f"conv2d: input channel axis is {cin} but weight expects {weight.shape[2]}")
    cout = weight.shape[3]
    if bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({cout},)")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride/padding ({stride}, {padding})")
    if h + 2 * padding < k or w + 2 * padding < k:
        raise ShapeError(f"conv2d: input {h}x{w} with padding {padding} smaller than kernel {k}")
    # floor semantics: trailing positions that do not fit a full step are dropped
    oh = (h + 2 * padding - k) // stride + 1
    ow = (w + 2 * padding - k) // stride + 1

    padded = np.pad(x.data, ((padding, padding), (padding, padding), (0, 0)))
    patches = _conv_patches(padded, k, stride)           # (oh, ow, cin, k, k)
    cols = np.ascontiguousarray(patches.transpose(0, 1, 3, 4, 2)).reshape(oh * ow, k * k * cin)
    wmat = weight.data.reshape(k * k * cin, cout)
    out = (cols @ wmat + bias.data).reshape(oh, ow, cout)

    def bwd(g):
        gm = g.reshape(oh * ow, cout)
        dw = (cols.T @ gm).reshape(k, k, cin, cout)
        db = gm.sum(axis=0)
        dcols = (gm @ wmat.T).reshape(oh, ow, k, k, cin)
        dpad = np.zeros_like(padded)
        for ky in range(k):
            ys = slice(ky, ky + stride * (oh - 1) + 1, stride)
            for kx in range(k):
                xs = slice(kx, kx + stride * (ow - 1) + 1, stride)
                dpad[ys, xs, :] += dcols[:, :, ky, kx, :]
        dx = dpad[padding:padding + h, padding:padding + w, :] if padding else dpad
        return dx, dw, db

    return _result(out, (x, weight, bias), bwd)


def per_location_conv(x: Tensor, kernels: Tensor) -> Tensor:
    """Depthwise convolution with a distinct k x k filter per spatial position.

    ``kernels`` has shape (h, w, k*k*c) with the last axis flattened in
    (dy, dx, channel) order; the input is zero-padded by (k-1)//2 so output
    and input shapes match.
    """
    _check_same_dtype(x, kernels)
    if x.data.ndim != 3 or kernels.data.ndim != 3:
        raise ShapeError(f"per_location_conv: expected rank-3 operands, got {x.shape} and {kernels.shape}")
    h, w, c = x.shape
    if kernels.shape[:2] != (h, w):
        raise ShapeError(f"per_location_conv: kernel grid {kernels.shape[:2]} != input grid {(h, w)}")
    kk = kernels.shape[2]
    if kk % c:
        raise ShapeError(f"per_location_conv: kernel last dim {kk} is not a multiple of {c} channels")
    k = int(round((kk // c) ** 0.5))
    if k * k * c != kk or k % 2 == 0:
        raise ShapeError(f"per_location_conv: kernel last dim {kk} != k*k*{c} for an odd k")
    pad = (k - 1) // 2

    padded = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    patches = _conv_patches(padded, k, 1)                    # (h, w, c, k, k)
    kern = kernels.data.reshape(h, w, k, k, c)
    out = np.einsum("yxcab,yxabc->yxc", patches, kern, optimize=True)

    def bwd(g):
        dk = np.einsum("yxcab,yxc->yxabc", patches, g, optimize=True).reshape(h, w, kk)
        dpad = np.zeros_like(padded)
        for a in range(k):
            for b in range(k):
                dpad[a:a + h, b:b + w, :] += kern[:, :, a, b, :] * g
        dx = dpad[pad:pad + h, pad:pad + w, :] if pad else dpad
        return dx, dk

    return _result(out, (x, kernels), bwd)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _interp_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Row-stochastic (n_out, n_in) bilinear weights, corners aligned."""
    m = np.zeros((n_out, n_in), dtype=np.float64)
    if n_out == 1 or n_in == 1:
        m[:, 0] = 1.0
        return m.astype(dtype)
    src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(src.astype(int), n_in - 2)
    frac = src - lo
    m[np.arange(n_out), lo] = 1.0 - frac
    m[np.arange(n_out), lo + 1] = frac
    return m.astype(dtype)


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Separable bilinear interpolation of (h, w, c) to (out_h, out_w, c)."""
    if x.data.ndim != 3:
        raise ShapeError(f"bilinear_resize: expected rank 3, got {x.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bilinear_resize: invalid target size ({out_h}, {out_w})")
    h, w, c = x.shape
    ry = _interp_matrix(h, out_h, x.dtype)
    rx = _interp_matrix(w, out_w, x.dtype)
    tmp = np.tensordot(ry, x.data, axes=(1, 0))          # (out_h, w, c)
    out = np.tensordot(rx, tmp, axes=(1, 1)).transpose(1, 0, 2)

    def bwd(g):
        t = np.tensordot(rx.T, g, axes=(1, 1)).transpose(1, 0, 2)   # (out_h, w, c)
        return (np.tensordot(ry.T, t, axes=(1, 0)),)

    return _result(np.ascontiguousarray(out), (x,), bwd)


# ---------------------------------------------------------------------------
# single-head self-attention
# ---------------------------------------------------------------------------

@dataclass
class AttentionParams:
    """Learned projections of one single-head self-attention block."""
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor

    def tensors(self):
        return [self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo]


def self_attention(x: Tensor, params: AttentionParams, return_weights: bool = False):
    """softmax(QK^T / sqrt(d)) V -> output projection -> residual add.

    ``x`` is (n, d); the result has the same shape. Rows of the attention
    matrix sum to 1.
    """
    if x.data.ndim != 2:
        raise ShapeError(f"self_attention: expected (n, d) input, got {x.shape}")
    d = x.shape[1]
    q = linear(x, params.wq, params.bq)
    k = linear(x, params.wk, params.bk)
    v = linear(x, params.wv, params.bv)
    scores = scalar_mul(matmul(q, transpose2d(k)), 1.0 / np.sqrt(d))
    attn = softmax_rows(scores)
    ctx = matmul(attn, v)
    out = add(linear(ctx, params.wo, params.bo), x)
    if return_weights:
        return out, attn
    return out


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def _topo_order(root: Tensor) -> list:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad tensor the scalar loss reaches.

    The recorded tape is released afterwards; a second call on the same loss
    raises GraphError.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._released:
        raise GraphError("backward: tape already consumed for this loss")

    order = _topo_order(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg

    for node in order:
        node._parents = ()
        node._backward = None
        node._released = node is loss or node._released
