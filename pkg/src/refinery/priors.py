"""Loading, saving, and stubbing of 1D prior vectors.

A prior vector is the flat feature summary of a degraded image computed by
some external embedding model. The on-disk format (magic ``OSF1``) is the
only contract between this package and whatever produces the vectors, so it
is kept byte-trivial: magic, u32 LE dim, u8 tag length + UTF-8 tag, then
``dim`` little-endian float32 values.

``stub_prior`` gives a deterministic stand-in so the rest of the pipeline
runs without any large model: coarse per-cell image statistics pushed
through a seeded random projection and squashed into [-1, 1].
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InputError

MAGIC = b"OSF1"


@dataclass
class PriorVector:
    values: np.ndarray    # float32, shape (dim,)
    source_tag: str = "stub"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if self.values.size < 1:
            raise InputError("prior vector must have at least one value")
        if not np.isfinite(self.values).all():
            raise InputError("prior vector contains non-finite values")

    @property
    def dim(self) -> int:
        return int(self.values.size)


def write_prior(path: str, v: PriorVector) -> None:
    tag = v.source_tag.encode("utf-8")
    if len(tag) > 255:
        raise InputError(f"source tag is {len(tag)} bytes; the format caps it at 255")
    payload = (MAGIC + struct.pack("<I", v.dim) + struct.pack("B", len(tag)) + tag
               + v.values.astype("<f4").tobytes())
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def read_prior(path: str) -> PriorVector:
    with open(path, "rb") as fh:
        blob = fh.read()

    def need(offset: int, count: int, what: str) -> bytes:
        if offset + count > len(blob):
            raise FormatError(f"truncated prior file, expected {what}", offset=offset)
        return blob[offset:offset + count]

    if need(0, 4, "magic") != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}", offset=0)
    dim = struct.unpack("<I", need(4, 4, "dim"))[0]
    if dim < 1:
        raise FormatError("dim field is 0", offset=4)
    tag_len = need(8, 1, "tag length")[0]
    try:
        tag = need(9, tag_len, "source tag").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"source tag is not valid UTF-8: {exc}", offset=9) from exc
    off = 9 + tag_len
    raw = need(off, 4 * dim, f"{dim} float32 values")
    if len(blob) != off + 4 * dim:
        raise FormatError("trailing bytes after payload", offset=off + 4 * dim)
    values = np.frombuffer(raw, dtype="<f4").astype(np.float32)
    if not np.isfinite(values).all():
        raise FormatError("payload contains non-finite values", offset=off)
    return PriorVector(values=values, source_tag=tag)


def _grid_stats(image: np.ndarray) -> np.ndarray:
    """Statistics a degraded image's embedding ought to expose.

    Per-channel mean, variance, and mean absolute first difference over a
    4x4 cell grid, plus global per-channel 10/50/90 quantiles. The first
    difference reacts to noise almost independently of content, and the
    quantiles trace the tone curve, so exposure-, noise-, and blur-like
    degradations all leave a legible mark. Everything is float32 with one
    summation order so the stub is bit-reproducible across platforms.
    """
    img = np.ascontiguousarray(image, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"stub_prior: expected an (H, W, 3) image, got {img.shape}")
    h, w, _ = img.shape
    dx = np.abs(img[:, 1:, :] - img[:, :-1, :])
    dy = np.abs(img[1:, :, :] - img[:-1, :, :])
    gy = min(4, h)
    gx = min(4, w)
    ys = np.linspace(0, h, gy + 1).astype(int)
    xs = np.linspace(0, w, gx + 1).astype(int)
    stats = np.empty((gy, gx, 3, 3), dtype=np.float32)
    for iy in range(gy):
        for ix in range(gx):
            y0, y1 = ys[iy], ys[iy + 1]
            x0, x1 = xs[ix], xs[ix + 1]
            cell = img[y0:y1, x0:x1, :].reshape(-1, 3)
            m = cell.mean(axis=0, dtype=np.float32)
            v = ((cell - m) ** 2).mean(axis=0, dtype=np.float32)
            diffs = np.concatenate([dx[y0:y1, x0:max(x0, x1 - 1), :].reshape(-1, 3),
                                    dy[y0:max(y0, y1 - 1), x0:x1, :].reshape(-1, 3)])
            hf = (diffs.mean(axis=0, dtype=np.float32) if diffs.size
                  else np.zeros(3, dtype=np.float32))
            stats[iy, ix, :, 0] = m
            stats[iy, ix, :, 1] = v
            stats[iy, ix, :, 2] = hf
    quantiles = np.quantile(img.reshape(-1, 3).astype(np.float64), (0.1, 0.5, 0.9),
                            axis=0).astype(np.float32)
    return np.concatenate([stats.reshape(-1), quantiles.reshape(-1)])


def stub_prior(image: np.ndarray, dim: int, seed: int) -> PriorVector:
    """Deterministic fake prior from coarse image statistics.

    Same (image, dim, seed) always yields the same vector; different image
    content changes it. The statistics are expanded to ``dim`` values through
    a seeded Gaussian projection, then tanh keeps everything in [-1, 1].
    """
    if dim < 1:
        raise InputError(f"stub_prior: dim must be >= 1, got {dim}")
    stats = _grid_stats(image)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x05F1])))
    proj = rng.standard_normal((dim, stats.size), dtype=np.float32)
    raw = (proj * stats[None, :]).sum(axis=1, dtype=np.float32)
    scale = np.float32(1.0 / np.sqrt(stats.size))
    return PriorVector(values=np.tanh(raw * scale), source_tag="stub")
