"""Parameter trees and the binary checkpoint format.

A parameter tree is an ordered list of (name, Tensor) pairs with unique
names. Checkpoints store the tree as little-endian float32 and round-trip
bit-exactly:

    magic "PTGC" | u32 version | u32 entry count
    per entry: u16 name length | UTF-8 name | u8 rank | u32 dims... | f32 data
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from .autodiff import Tensor
from .errors import FormatError, InputError

MAGIC = b"PTGC"
VERSION = 1

ParameterTree = list  # list[tuple[str, Tensor]]


def check_tree(tree: ParameterTree) -> None:
    names = [n for n, _ in tree]
    if len(names) != len(set(names)):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise InputError(f"parameter tree has duplicate names: {dupes}")


def param_count(tree: ParameterTree) -> int:
    return sum(t.data.size for _, t in tree)


def zero_grads(tree: ParameterTree) -> None:
    for _, t in tree:
        t.zero_grad()


def save_checkpoint(path, tree: ParameterTree) -> None:
    check_tree(tree)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tree)))
        for name, tensor in tree:
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise InputError(f"parameter name too long: {name[:32]}...")
            arr = np.ascontiguousarray(tensor.data, dtype="<f4")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    with open(path, "rb") as fh:
        blob = fh.read()

    def need(offset, n, what):
        if offset + n > len(blob):
            raise FormatError(f"checkpoint truncated while reading {what}", offset=offset)
        return offset + n

    pos = need(0, 4, "magic")
    if blob[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {blob[:4]!r}", offset=0)
    end = need(pos, 8, "header")
    version, count = struct.unpack_from("<II", blob, pos)
    pos = end
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)

    out: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        end = need(pos, 2, "name length")
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos = end
        end = need(pos, nlen, "name")
        name = blob[pos:end].decode("utf-8")
        pos = end
        end = need(pos, 1, "rank")
        rank = blob[pos]
        pos = end
        end = need(pos, 4 * rank, "dims")
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos = end
        size = int(np.prod(dims)) if rank else 1
        end = need(pos, 4 * size, f"data of {name}")
        arr = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).reshape(dims).copy()
        pos = end
        if name in out:
            raise FormatError(f"duplicate checkpoint entry {name!r}", offset=pos)
        out[name] = arr
    if pos != len(blob):
        raise FormatError(f"{len(blob) - pos} trailing bytes after last entry", offset=pos)
    return out


def assign_params(tree: ParameterTree, values: "OrderedDict[str, np.ndarray]") -> None:
    """Load checkpoint arrays into a model's tensors, shape-checked."""
    by_name = dict(tree)
    missing = [n for n in by_name if n not in values]
    extra = [n for n in values if n not in by_name]
    if missing or extra:
        raise InputError(f"checkpoint does not match model: missing={missing[:5]} extra={extra[:5]}")
    for name, arr in values.items():
        target = by_name[name]
        if tuple(arr.shape) != target.shape:
            raise InputError(f"checkpoint entry {name!r} has shape {arr.shape}, model expects {target.shape}")
        target.data = arr.astype(target.dtype)
