"""Component knock-out study: retrain with one piece disabled at a time.

Each variant is a construction-time change, not a post-hoc mask, so the
comparison measures what the component contributes when the rest of the
network trains around its absence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .datasets import Sample
from .model import RefinementConfig
from .train import TrainConfig, TrainResult, train

VARIANTS = ("no_sve", "no_ca", "no_sa", "no_pos_embed", "snr_mask", "concat_prior")
FULL = "full"


@dataclass
class AblationTable:
    """Held-out refined PSNR per setting, in run order."""
    rows: dict = field(default_factory=dict)   # name -> TrainResult

    def refined_psnr(self, name: str) -> float:
        return self.rows[name].final_psnr_refined

    def format(self) -> str:
        width = max(len(n) for n in self.rows)
        lines = [f"{'setting':<{width}}  psnr_base  psnr_refined"]
        for name, result in self.rows.items():
            lines.append(f"{name:<{width}}  {result.final_psnr_base:9.4f}  "
                         f"{result.final_psnr_refined:12.4f}")
        return "\n".join(lines)


def run_ablation(train_cfg: TrainConfig, model_cfg: RefinementConfig,
                 train_set: list[Sample], val_set: list[Sample],
                 variants=VARIANTS, progress=None) -> AblationTable:
    """Train the full setting plus each single-toggle variant on one seed."""
    table = AblationTable()
    for name in (FULL,) + tuple(variants):
        toggles = frozenset() if name == FULL else frozenset({name})
        cfg = replace(train_cfg, ablation=toggles)
        result = train(cfg, model_cfg, train_set, val_set)
        table.rows[name] = result
        if progress is not None:
            progress(name, result)
    return table
