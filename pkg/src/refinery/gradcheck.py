"""Central finite-difference verification of analytic gradients.

A *subject* is a zero-argument callable that rebuilds its forward pass from
the current contents of the parameter tensors and returns a scalar loss
Tensor. Checks should run on float64 tensors; float32 does not leave enough
headroom below the 1e-4 tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import Tensor, backward

DEFAULT_EPS = 1e-4
DEFAULT_TOLERANCE = 1e-4


@dataclass
class GradCheckEntry:
    """Worst relative error observed for one named parameter tensor."""
    name: str
    max_rel_error: float
    checked_coords: int

    def ok(self, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_rel_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| over max(|a|, |n|), floored at 1e-5.

    The floor turns the criterion into an absolute one (agreement within
    1e-9 at the default tolerance) for near-zero gradients, which central
    differences cannot resolve relatively in double precision: their noise
    floor is around 1e-11 for unit-scale losses.
    """
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-5)


def check_gradients(
    subject: Callable[[], Tensor],
    params: Sequence[tuple[str, Tensor]],
    eps: float = DEFAULT_EPS,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    retry_eps: Optional[float] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> list[GradCheckEntry]:
    """Compare backward() gradients against central differences.

    ``max_coords`` caps how many coordinates of each parameter are probed
    (chosen by ``rng``); None probes every coordinate. A coordinate whose
    error at ``eps`` exceeds ``tolerance`` is re-measured at ``retry_eps``
    when given and keeps the better result: piecewise-linear points (relu)
    need a step small enough not to straddle the nearest kink, while smooth
    ones prefer the larger step's lower rounding noise. Failures are
    reported in the entries, never raised.
    """
    if rng is None:
        rng = np.random.default_rng(0)

    for _, p in params:
        p.zero_grad()
    loss = subject()
    backward(loss)
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params}

    def measure(flat, idx, step) -> float:
        saved = flat[idx]
        flat[idx] = saved + step
        up = float(subject().data)
        flat[idx] = saved - step
        down = float(subject().data)
        flat[idx] = saved
        return (up - down) / (2.0 * step)

    entries = []
    for name, p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = np.sort(rng.choice(n, size=max_coords, replace=False))
        else:
            coords = np.arange(n)
        worst = 0.0
        for idx in coords:
            a = float(analytic[name].reshape(-1)[idx])
            err = relative_error(a, measure(flat, idx, eps))
            if retry_eps is not None and err >= tolerance:
                err = min(err, relative_error(a, measure(flat, idx, retry_eps)))
            worst = max(worst, err)
        entries.append(GradCheckEntry(name, worst, len(coords)))
    return entries


def all_ok(entries: Sequence[GradCheckEntry], tolerance: float = DEFAULT_TOLERANCE) -> bool:
    return all(e.ok(tolerance) for e in entries)


def format_report(entries: Sequence[GradCheckEntry], tolerance: float = DEFAULT_TOLERANCE) -> str:
    lines = []
    for e in entries:
        status = "ok" if e.ok(tolerance) else "FAIL"
        lines.append(f"{status:4s}  {e.name:40s} max_rel_err={e.max_rel_error:.3e}  coords={e.checked_coords}")
    return "\n".join(lines)
