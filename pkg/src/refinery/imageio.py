"""Binary PPM (P6, maxval 255) image reading and writing.

Pixels are float arrays in [0, 1] everywhere inside the package; this module
is the only place quantization happens. Values quantize by round-half-up
(floor(v * 255 + 0.5)) after clipping, so a save/load round trip moves each
channel by at most 1/510.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError, InputError


def _read_header_token(blob: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines, then take one token
    n = len(blob)
    while pos < n:
        ch = blob[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < n and blob[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise FormatError("truncated header", offset=pos)
    start = pos
    while pos < n and not blob[pos:pos + 1].isspace():
        pos += 1
    return blob[start:pos], pos


def read_ppm(path: str) -> np.ndarray:
    """Load a P6 image as float32 (H, W, 3) scaled to [0, 1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P6":
        raise FormatError(f"bad magic {blob[:2]!r}, expected b'P6'", offset=0)
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_header_token(blob, pos)
        if not token.isdigit():
            raise FormatError(f"non-numeric header field {token!r}", offset=pos - len(token))
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"degenerate image size {width}x{height}", offset=2)
    if maxval != 255:
        raise FormatError(f"maxval {maxval} unsupported, expected 255", offset=pos)
    pos += 1  # single whitespace byte separating header from raster
    expected = width * height * 3
    raster = blob[pos:pos + expected]
    if len(raster) < expected:
        raise FormatError(f"raster has {len(raster)} bytes, expected {expected}", offset=pos)
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return img.astype(np.float32) / np.float32(255.0)


def write_ppm(path: str, image: np.ndarray) -> None:
    """Quantize a float (H, W, 3) image in [0, 1] to P6 bytes."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"write_ppm: expected an (H, W, 3) array, got {img.shape}")
    if not np.isfinite(img).all():
        raise InputError("write_ppm: image contains non-finite values")
    h, w, _ = img.shape
    q = np.floor(np.clip(img.astype(np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(q.tobytes())
    os.replace(tmp, path)
