"""Joint optimization of the baseline restorer and the refinement network.

One loss supervises both outputs against the clean target:

    loss = mae(restored, clean) + lambda1 * mae(refined, clean)

so the baseline keeps learning while the refiner learns to correct it. The
optimizer is Adam with the usual (0.9, 0.999) moment decays; the default
cosine schedule anneals the step size to zero across the run, which keeps
the late epochs from burning the refiner's held-out gains into
sample-specific corrections. Training batches are randomly mirrored by
default (evaluation never is), which at a few hundred images is the
difference between learning a correction and memorizing the set. Everything
is seeded through named streams, so a config plus a dataset reproduces the
training run bit for bit, checkpoint and log included.
"""

from __future__ import annotations

import math
import os
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .baseline import BaselineRestorer
from .datasets import Sample
from .errors import ConfigError, InputError, TrainingAborted
from .metrics import MetricReport, psnr, ssim
from .model import RefinementConfig, RefinementOutput, RefinerNetwork, validate_ablation
from .params import assign_params, load_checkpoint, save_checkpoint, zero_grads

LOG_NAME = "train_log.txt"
CHECKPOINT_NAME = "checkpoint.ptgc"


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 1e-3
    lambda1: float = 1.0          # weight of the refined-output loss term
    lr_schedule: str = "cosine"   # "cosine" anneals to 0, "constant" does not
    seed: int = 0
    ablation: frozenset = frozenset()
    freeze_baseline: bool = False
    augment_flips: bool = True    # seeded train-time flips; eval never flips

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.lambda1 < 0:
            raise ConfigError(f"lambda1 must be >= 0, got {self.lambda1}")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ConfigError(f"lr_schedule must be 'cosine' or 'constant', "
                              f"got {self.lr_schedule!r}")
        validate_ablation(self.ablation)

    def epoch_lr(self, epoch: int) -> float:
        """Step size for 1-based ``epoch``; cosine decays from lr toward 0."""
        if self.lr_schedule == "constant":
            return self.learning_rate
        return self.learning_rate * 0.5 * (1.0 + math.cos(
            math.pi * (epoch - 1) / self.epochs))


class Adam:
    """Adaptive-moment optimizer with bias correction."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for _, p in self.params]
        self._v = [np.zeros_like(p.data) for _, p in self.params]

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for (name, p), m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad.astype(p.data.dtype, copy=False)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= (self.lr / b1c) * m / (np.sqrt(v / b2c) + self.eps)


def _flipped(s: Sample, flip_v: bool, flip_h: bool) -> Sample:
    """Mirror the clean/degraded pair; the prior vector rides along unchanged.

    The prior summarizes how an image is degraded, not where things sit, so a
    mirrored copy keeps it honest: any model that tries to read layout out of
    the prior gets punished instead of rewarded.
    """
    if not (flip_v or flip_h):
        return s
    axes = tuple(ax for ax, on in ((0, flip_v), (1, flip_h)) if on)
    return replace(s, clean=np.ascontiguousarray(np.flip(s.clean, axes)),
                   degraded=np.ascontiguousarray(np.flip(s.degraded, axes)))


def joint_loss(i_hat: Tensor, i_bar: Tensor, clean: Tensor, lambda1: float) -> Tensor:
    base_term = ad.mean(ad.absolute(ad.sub(i_hat, clean)))
    refined_term = ad.mean(ad.absolute(ad.sub(i_bar, clean)))
    return ad.add(base_term, ad.scalar_mul(refined_term, lambda1))


@dataclass
class JointModel:
    baseline: BaselineRestorer
    refiner: RefinerNetwork

    def named_params(self):
        return ([("baseline." + n, t) for n, t in self.baseline.named_params()]
                + [("refiner." + n, t) for n, t in self.refiner.named_params()])

    def forward(self, sample: Sample, **refine_kwargs) -> tuple[Tensor, RefinementOutput]:
        i_d = Tensor(sample.degraded)
        i_hat = self.baseline(i_d)
        out = self.refiner.refine(i_d, i_hat, Tensor(sample.prior.values), **refine_kwargs)
        return i_hat, out


def build_joint(model_cfg: RefinementConfig, train_cfg: TrainConfig) -> JointModel:
    train_cfg.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([train_cfg.seed, 0])))
    baseline = BaselineRestorer(rng)
    refiner = RefinerNetwork(model_cfg, rng, ablation=train_cfg.ablation)
    if train_cfg.freeze_baseline:
        for _, t in baseline.named_params():
            t.requires_grad = False
    return JointModel(baseline=baseline, refiner=refiner)


def load_joint(checkpoint_path: str, model_cfg: RefinementConfig,
               train_cfg: TrainConfig) -> JointModel:
    model = build_joint(model_cfg, replace(train_cfg, seed=0))
    values = load_checkpoint(checkpoint_path)
    tree = ([("baseline." + n, t) for n, t in model.baseline.named_params()]
            + [("refiner." + n, t) for n, t in model.refiner.named_params()])
    assign_params(tree, values)
    return model


def load_baseline(model: JointModel, checkpoint_path: str) -> None:
    """Install checkpointed baseline weights; the refiner is left alone.

    Accepts a full joint checkpoint and ignores everything outside
    ``baseline.``, so a restorer pretrained with ``lambda1=0`` drops in even
    though that run also serialized its (never-updated) refiner.
    """
    values = load_checkpoint(checkpoint_path)
    subset = OrderedDict((n[len("baseline."):], a) for n, a in values.items()
                         if n.startswith("baseline."))
    if not subset:
        raise InputError(f"checkpoint {checkpoint_path} holds no baseline parameters")
    assign_params(model.baseline.named_params(), subset)


def evaluate_model(model: JointModel, samples: list[Sample]) -> tuple[MetricReport, MetricReport]:
    """Mean PSNR/SSIM of the baseline output and the refined output.

    Both predictions are clamped to [0, 1] before scoring; reduction follows
    manifest order for determinism.
    """
    base_report, refined_report = MetricReport(), MetricReport()
    with ad.no_grad():
        for s in samples:
            i_hat, out = model.forward(s)
            base = np.clip(i_hat.data, 0.0, 1.0)
            refined = np.clip(out.composed.data, 0.0, 1.0)
            base_report.add(psnr(base, s.clean), ssim(base, s.clean))
            refined_report.add(psnr(refined, s.clean), ssim(refined, s.clean))
    return base_report, refined_report


def _mean_loss(model: JointModel, samples: list[Sample], lambda1: float) -> float:
    total = 0.0
    with ad.no_grad():
        for s in samples:
            i_hat, out = model.forward(s)
            total += float(joint_loss(i_hat, out.composed, Tensor(s.clean), lambda1).data)
    return total / len(samples)


def _log_line(epoch: int, loss: float, base: MetricReport, refined: MetricReport) -> str:
    return (f"{epoch}, {loss:.6f}, {base.psnr_db:.4f}, {refined.psnr_db:.4f}, "
            f"{base.ssim:.6f}, {refined.ssim:.6f}")


@dataclass
class TrainResult:
    model: JointModel
    log_lines: list = field(default_factory=list)
    checkpoint_path: str = ""
    log_path: str = ""

    @property
    def final_psnr_base(self) -> float:
        return float(self.log_lines[-1].split(", ")[2])

    @property
    def final_psnr_refined(self) -> float:
        return float(self.log_lines[-1].split(", ")[3])


def train(train_cfg: TrainConfig, model_cfg: RefinementConfig,
          train_set: list[Sample], val_set: list[Sample],
          out_dir: str | None = None,
          baseline_checkpoint: str | None = None) -> TrainResult:
    """Run the optimization; returns the model plus the per-epoch log.

    Log row 0 is the untrained state; row ``e`` reflects the model after
    epoch ``e``. Each row: epoch, mean train loss, held-out baseline PSNR,
    refined PSNR, baseline SSIM, refined SSIM. Passing
    ``baseline_checkpoint`` starts from pretrained restorer weights; with
    ``freeze_baseline`` that trains the refiner against a fixed restorer,
    the deployment setting.
    """
    train_cfg.validate()
    model_cfg.validate()
    if not train_set:
        raise ConfigError("empty training set")
    model = build_joint(model_cfg, train_cfg)
    if baseline_checkpoint is not None:
        load_baseline(model, baseline_checkpoint)
    tree = model.named_params()
    trainable = [(n, t) for n, t in tree if t.requires_grad]
    opt = Adam(trainable, lr=train_cfg.learning_rate)
    shuffle_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([train_cfg.seed, 1])))
    # flips draw from their own stream so switching them off (or toggling an
    # ablation) never perturbs the shuffle order or anyone's init
    aug_rng = (np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([train_cfg.seed, 2])))
        if train_cfg.augment_flips else None)

    log_lines = [_log_line(0, _mean_loss(model, train_set, train_cfg.lambda1),
                           *evaluate_model(model, val_set))]

    step = 0
    for epoch in range(1, train_cfg.epochs + 1):
        opt.lr = train_cfg.epoch_lr(epoch)
        order = shuffle_rng.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), train_cfg.batch_size):
            chunk = order[start:start + train_cfg.batch_size]
            zero_grads(trainable)
            step += 1
            for idx in chunk:
                s = train_set[int(idx)]
                if aug_rng is not None:
                    bits = aug_rng.integers(0, 2, size=2)
                    s = _flipped(s, bool(bits[0]), bool(bits[1]))
                i_hat, out = model.forward(s)
                loss = joint_loss(i_hat, out.composed, Tensor(s.clean), train_cfg.lambda1)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise TrainingAborted(f"loss became {value} on image {s.name}", step=step)
                epoch_loss += value
                ad.backward(ad.scalar_mul(loss, 1.0 / len(chunk)))
            opt.step()
        base, refined = evaluate_model(model, val_set)
        log_lines.append(_log_line(epoch, epoch_loss / len(order), base, refined))

    result = TrainResult(model=model, log_lines=log_lines)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
        result.log_path = os.path.join(out_dir, LOG_NAME)
        save_checkpoint(result.checkpoint_path, tree)
        with open(result.log_path, "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in log_lines))
    return result
