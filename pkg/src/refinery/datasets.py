"""Toy datasets: synthetic clean images, manifests, and on-the-fly loading.

A dataset manifest lists one image per line: the clean-image path, then
optionally the path of a prior file. Paths are resolved relative to the
manifest. When no prior path is given the loader stubs one deterministically
from the degraded image.

Degradation happens at load time. Each image gets its own parameters drawn
from the per-kind sampling ranges with a seed derived from (data_seed, row
index), so a manifest plus a data seed fully determines every degraded pixel
and every stub prior.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .degrade import DegradationSpec, degrade, sample_spec
from .errors import InputError
from .imageio import read_ppm
from .priors import PriorVector, read_prior, stub_prior


@dataclass
class Sample:
    name: str
    clean: np.ndarray       # (H, W, 3) float32 in [0, 1]
    degraded: np.ndarray    # same shape, clamped
    prior: PriorVector
    spec: DegradationSpec


def synth_clean(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Random structured test card: gradient backdrop plus soft-edged shapes."""
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, h, dtype=np.float32),
                         np.linspace(0.0, 1.0, w, dtype=np.float32), indexing="ij")
    img = np.empty((h, w, 3), dtype=np.float32)
    for c in range(3):
        gx, gy = rng.uniform(-0.4, 0.4, size=2)
        img[:, :, c] = rng.uniform(0.3, 0.7) + gx * xx + gy * yy

    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        ry, rx = rng.uniform(0.08, 0.3, size=2)
        color = rng.uniform(0.05, 0.95, size=3).astype(np.float32)
        d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        if rng.random() < 0.4:
            d = np.maximum(np.abs(yy - cy) / ry, np.abs(xx - cx) / rx) ** 2
        # sharpness varies so some edges stress blur removal, others noise
        edge = 1.0 / (1.0 + np.exp(np.clip((d - 1.0) * rng.uniform(8.0, 40.0), -30, 30)))
        img = img * (1.0 - edge[:, :, None]) + color[None, None, :] * edge[:, :, None]

    if rng.random() < 0.5:
        freq = rng.uniform(2.0, 8.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        img += (0.05 * np.sin(freq * 2 * np.pi * (xx + yy) + phase))[:, :, None]
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def load_manifest(path: str) -> list[tuple[str, str | None]]:
    """Rows of (clean path, prior path or None), resolved against the manifest."""
    base = os.path.dirname(os.path.abspath(path))
    rows: list[tuple[str, str | None]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) > 2:
                raise InputError(f"manifest line has {len(parts)} fields, expected 1 or 2: {line!r}")
            clean = os.path.join(base, parts[0])
            prior = os.path.join(base, parts[1]) if len(parts) == 2 else None
            rows.append((clean, prior))
    if not rows:
        raise InputError(f"manifest {path} lists no images")
    return rows


def load_dataset(manifest_path: str, kind: str, data_seed: int, prior_dim: int,
                 prior_seed: int = 0) -> list[Sample]:
    """Read, degrade, and attach priors to every manifest row.

    ``data_seed`` drives the per-image degradation draws and should differ
    between splits; ``prior_seed`` picks the stub feature extractor and must
    be shared by every split a model sees, or the stub stops behaving like
    one fixed pre-trained network.
    """
    samples = []
    for index, (clean_path, prior_path) in enumerate(load_manifest(manifest_path)):
        if not os.path.exists(clean_path):
            raise InputError(f"clean image not found: {clean_path}")
        clean = read_ppm(clean_path)
        row_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([int(data_seed), index])))
        spec = sample_spec(kind, row_rng)
        degraded = degrade(clean, spec)
        if prior_path is None:
            prior = stub_prior(degraded, prior_dim, prior_seed)
        else:
            if not os.path.exists(prior_path):
                raise InputError(f"prior file for image {os.path.basename(clean_path)} "
                                 f"not found: {prior_path}")
            prior = read_prior(prior_path)
            if prior.dim != prior_dim:
                raise InputError(f"prior for {os.path.basename(clean_path)} has dim "
                                 f"{prior.dim}, model expects {prior_dim}")
        samples.append(Sample(name=os.path.basename(clean_path), clean=clean,
                              degraded=degraded, prior=prior, spec=spec))
    return samples


def write_toy_dataset(out_dir: str, count: int, size: int, seed: int,
                      manifest_name: str = "manifest.txt") -> str:
    """Synthesize ``count`` clean PPMs plus a manifest; returns the manifest path."""
    from .imageio import write_ppm

    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xDA7A])))
    names = []
    for i in range(count):
        name = f"clean_{i:04d}.ppm"
        write_ppm(os.path.join(out_dir, name), synth_clean(size, size, rng))
        names.append(name)
    manifest = os.path.join(out_dir, manifest_name)
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("".join(n + "\n" for n in names))
    return manifest
