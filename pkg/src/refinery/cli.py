"""Command-line entry point.

Subcommands: gradcheck, train, eval, refine, ablate, stub-priors. Settings
come from an optional JSON config file (--config) whose keys are listed in
``CONFIG_KEYS``; any flag given on the command line overrides the file.
Every artifact-producing run writes the fully-resolved configuration next to
its outputs, so a run is reproducible from that file alone.

Exit codes: 0 success, 1 validation or usage errors, 2 file and format
errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .ablation import VARIANTS, run_ablation
from .autodiff import Tensor, no_grad
from .datasets import load_dataset, load_manifest
from .degrade import KINDS
from .errors import ConfigError, FormatError, InputError, RefineryError
from .gradcheck import DEFAULT_TOLERANCE
from .imageio import read_ppm, write_ppm
from .model import ABLATION_TOGGLES, RefinementConfig
from .priors import read_prior, stub_prior, write_prior
from .train import TrainConfig, evaluate_model, load_joint, train

# every recognized config key, its type, and its default
CONFIG_KEYS = {
    # model shape
    "channels": (int, 16),
    "prior_dim": (int, 512),
    "kernel_size": (int, 3),
    "downsample_levels": (int, 2),
    "attn_downsample": (int, 4),
    "mask_bias_init": (float, 4.0),
    "gate_bias_init": (float, 4.0),
    # optimization
    "epochs": (int, 30),
    "batch_size": (int, 4),
    "learning_rate": (float, 1e-3),
    "lambda1": (float, 1.0),
    "lr_schedule": (str, "cosine"),
    "seed": (int, 0),
    "ablation": (list, []),
    "freeze_baseline": (bool, False),
    "augment_flips": (bool, True),
    # data
    "degradation": (str, "lowlight"),
    "data_seed": (int, 1234),
    "prior_seed": (int, 0),
    "train_manifest": (str, None),
    "val_manifest": (str, None),
    # artifacts
    "out_dir": (str, None),
    "checkpoint": (str, None),
}

RESOLVED_NAME = "resolved_config.json"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for I/O here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_fail(message))


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in raw.items():
        want = CONFIG_KEYS[key][0]
        if value is None:
            continue
        if want in (int, float) and isinstance(value, bool):
            raise ConfigError(f"config key {key}: expected {want.__name__}, got a boolean")
        if want is float and isinstance(value, int):
            raw[key] = float(value)
        elif not isinstance(value, want):
            raise ConfigError(f"config key {key}: expected {want.__name__}, got {type(value).__name__}")
    return raw


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit command-line flags."""
    merged = {key: default for key, (_, default) in CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if isinstance(merged["ablation"], str):
        merged["ablation"] = [t for t in merged["ablation"].split(",") if t]
    return merged


def _split_config(merged: dict) -> tuple[RefinementConfig, TrainConfig]:
    model_cfg = RefinementConfig(
        channels=merged["channels"], prior_dim=merged["prior_dim"],
        kernel_size=merged["kernel_size"], downsample_levels=merged["downsample_levels"],
        attn_downsample=merged["attn_downsample"], mask_bias_init=merged["mask_bias_init"],
        gate_bias_init=merged["gate_bias_init"])
    train_cfg = TrainConfig(
        epochs=merged["epochs"], batch_size=merged["batch_size"],
        learning_rate=merged["learning_rate"], lambda1=merged["lambda1"],
        lr_schedule=merged["lr_schedule"], seed=merged["seed"],
        ablation=frozenset(merged["ablation"]),
        freeze_baseline=merged["freeze_baseline"],
        augment_flips=merged["augment_flips"])
    model_cfg.validate()
    train_cfg.validate()
    return model_cfg, train_cfg


def _write_resolved(merged: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, RESOLVED_NAME), "w", encoding="utf-8") as fh:
        json.dump(merged, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(merged: dict, keys: list, command: str) -> None:
    missing = [k for k in keys if merged.get(k) is None]
    if missing:
        raise ConfigError(f"{command}: missing required settings {missing} "
                          f"(set via --config file or flags)")


# -- subcommands -------------------------------------------------------------

def _cmd_gradcheck(args) -> int:
    from .checks import format_suite, run_suite

    tol = args.tolerance
    results = run_suite(seed=args.seed or 0, instances=args.instances, tol=tol)
    print(format_suite(results, tol))
    bad = [r for r in results if not r.ok(tol)]
    print(f"{len(results) - len(bad)}/{len(results)} gradient cases within {tol:g}")
    return 0 if not bad else 1


def _cmd_train(args) -> int:
    merged = resolve_config(args)
    _require(merged, ["train_manifest", "val_manifest", "out_dir"], "train")
    model_cfg, train_cfg = _split_config(merged)
    train_set = load_dataset(merged["train_manifest"], merged["degradation"],
                             merged["data_seed"], model_cfg.prior_dim,
                             prior_seed=merged["prior_seed"])
    val_set = load_dataset(merged["val_manifest"], merged["degradation"],
                           merged["data_seed"] + 1, model_cfg.prior_dim,
                           prior_seed=merged["prior_seed"])
    _write_resolved(merged, merged["out_dir"])
    result = train(train_cfg, model_cfg, train_set, val_set, out_dir=merged["out_dir"])
    for line in result.log_lines:
        print(line)
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    merged = resolve_config(args)
    _require(merged, ["checkpoint", "val_manifest"], "eval")
    model_cfg, train_cfg = _split_config(merged)
    val_set = load_dataset(merged["val_manifest"], merged["degradation"],
                           merged["data_seed"] + 1, model_cfg.prior_dim,
                           prior_seed=merged["prior_seed"])
    model = load_joint(merged["checkpoint"], model_cfg, train_cfg)
    base, refined = evaluate_model(model, val_set)
    lines = [f"baseline  psnr={base.psnr_db:.4f} ssim={base.ssim:.6f}",
             f"refined   psnr={refined.psnr_db:.4f} ssim={refined.ssim:.6f}"]
    print("\n".join(lines))
    if merged["out_dir"]:
        _write_resolved(merged, merged["out_dir"])
        with open(os.path.join(merged["out_dir"], "metrics.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_refine(args) -> int:
    merged = resolve_config(args)
    _require(merged, ["checkpoint", "out_dir"], "refine")
    if not args.image:
        raise ConfigError("refine: --image is required")
    model_cfg, train_cfg = _split_config(merged)
    model = load_joint(merged["checkpoint"], model_cfg, train_cfg)
    degraded = read_ppm(args.image)
    if args.prior:
        prior = read_prior(args.prior)
        if prior.dim != model_cfg.prior_dim:
            raise InputError(f"prior has dim {prior.dim}, model expects {model_cfg.prior_dim}")
    else:
        prior = stub_prior(degraded, model_cfg.prior_dim, merged["prior_seed"])

    with no_grad():
        i_d = Tensor(degraded)
        i_hat = model.baseline(i_d)
        out = model.refiner.refine(i_d, i_hat, Tensor(prior.values),
                                   force_mask=args.force_mask,
                                   force_residual=args.force_residual)
    out_dir = merged["out_dir"]
    _write_resolved(merged, out_dir)
    write_ppm(os.path.join(out_dir, "refined.ppm"), np.clip(out.composed.data, 0.0, 1.0))
    mask3 = np.repeat(out.mask.data, 3, axis=2)
    write_ppm(os.path.join(out_dir, "mask.ppm"), mask3)
    # residuals are signed; display them centered on mid-gray
    vis = 0.5 + 0.5 * np.clip(out.residual.data, -1.0, 1.0)
    write_ppm(os.path.join(out_dir, "residual.ppm"), vis)
    print(f"wrote refined.ppm, mask.ppm, residual.ppm to {out_dir}")
    return 0


def _cmd_ablate(args) -> int:
    merged = resolve_config(args)
    _require(merged, ["train_manifest", "val_manifest", "out_dir"], "ablate")
    model_cfg, train_cfg = _split_config(merged)
    variants = tuple(args.variants.split(",")) if args.variants else VARIANTS
    unknown = set(variants) - ABLATION_TOGGLES
    if unknown:
        raise ConfigError(f"unknown ablation variants: {sorted(unknown)}")
    train_set = load_dataset(merged["train_manifest"], merged["degradation"],
                             merged["data_seed"], model_cfg.prior_dim,
                             prior_seed=merged["prior_seed"])
    val_set = load_dataset(merged["val_manifest"], merged["degradation"],
                           merged["data_seed"] + 1, model_cfg.prior_dim,
                           prior_seed=merged["prior_seed"])
    _write_resolved(merged, merged["out_dir"])

    def progress(name, result):
        print(f"[{name}] refined psnr {result.final_psnr_refined:.4f}")

    table = run_ablation(train_cfg, model_cfg, train_set, val_set,
                         variants=variants, progress=progress)
    text = table.format()
    print(text)
    with open(os.path.join(merged["out_dir"], "ablation.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return 0


def _cmd_stub_priors(args) -> int:
    merged = resolve_config(args)
    _require(merged, ["out_dir"], "stub-priors")
    if not args.manifest:
        raise ConfigError("stub-priors: --manifest is required")
    rows = load_manifest(args.manifest)
    out_dir = merged["out_dir"]
    _write_resolved(merged, out_dir)
    new_rows = []
    for clean_path, _ in rows:
        image = read_ppm(clean_path)
        prior = stub_prior(image, merged["prior_dim"], merged["prior_seed"])
        name = os.path.splitext(os.path.basename(clean_path))[0] + ".osf1"
        write_prior(os.path.join(out_dir, name), prior)
        new_rows.append((clean_path, os.path.join(out_dir, name)))
    manifest_out = os.path.join(out_dir, "manifest_with_priors.txt")
    with open(manifest_out, "w", encoding="utf-8") as fh:
        for clean_path, prior_path in new_rows:
            fh.write(f"{os.path.relpath(clean_path, out_dir)} "
                     f"{os.path.relpath(prior_path, out_dir)}\n")
    print(f"wrote {len(new_rows)} prior files and {manifest_out}")
    return 0


# -- argument wiring ----------------------------------------------------------

def _add_config_flags(p: _Parser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--channels", type=int)
    p.add_argument("--prior-dim", dest="prior_dim", type=int)
    p.add_argument("--kernel-size", dest="kernel_size", type=int)
    p.add_argument("--downsample-levels", dest="downsample_levels", type=int)
    p.add_argument("--attn-downsample", dest="attn_downsample", type=int)
    p.add_argument("--mask-bias-init", dest="mask_bias_init", type=float)
    p.add_argument("--gate-bias-init", dest="gate_bias_init", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lr-schedule", dest="lr_schedule", choices=("cosine", "constant"))
    p.add_argument("--seed", type=int)
    p.add_argument("--ablation", help="comma-separated toggles, e.g. no_ca,no_sa")
    p.add_argument("--freeze-baseline", dest="freeze_baseline", action="store_const", const=True)
    p.add_argument("--no-augment", dest="augment_flips", action="store_const", const=False,
                   help="disable the seeded train-time flips")
    p.add_argument("--degradation", choices=KINDS)
    p.add_argument("--data-seed", dest="data_seed", type=int)
    p.add_argument("--prior-seed", dest="prior_seed", type=int)
    p.add_argument("--train-manifest", dest="train_manifest")
    p.add_argument("--val-manifest", dest="val_manifest")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--checkpoint")


def build_parser() -> _Parser:
    parser = _Parser(prog="refinery",
                     description="Prior-guided refinement of image restoration outputs.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gradcheck", help="finite-difference check of every op")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("train", help="jointly train the restorer and refiner")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("refine", help="refine one degraded image")
    _add_config_flags(p)
    p.add_argument("--image", help="degraded input image (PPM)")
    p.add_argument("--prior", help="OSF1 prior file (default: stub from the image)")
    p.add_argument("--force-mask", dest="force_mask", type=float)
    p.add_argument("--force-residual", dest="force_residual", type=float)
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("ablate", help="train the full setting and each knock-out")
    _add_config_flags(p)
    p.add_argument("--variants", help="comma-separated subset of toggles")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("stub-priors", help="write stub OSF1 files for a manifest")
    _add_config_flags(p)
    p.add_argument("--manifest", help="manifest of images to stub priors for")
    p.set_defaults(func=_cmd_stub_priors)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return _fail("a subcommand is required")
    try:
        return args.func(args)
    except FormatError as exc:
        return_code = 2
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, json.JSONDecodeError) as exc:
        return_code = 2
        print(f"error: {exc}", file=sys.stderr)
    except RefineryError as exc:
        return_code = 1
        print(f"error: {exc}", file=sys.stderr)
    return return_code


if __name__ == "__main__":
    sys.exit(main())
