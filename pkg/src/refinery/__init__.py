"""Prior-guided refinement of image restoration outputs.

A small numpy package: a reverse-mode autodiff engine, a sub-million
parameter refinement network conditioned on 1D image priors, synthetic
degradations, a joint training harness with PSNR/SSIM evaluation, and
file formats for priors (OSF1) and checkpoints (PTGC).
"""

from .autodiff import Tensor, backward, no_grad
from .baseline import BaselineRestorer
from .datasets import Sample, load_dataset, load_manifest, synth_clean, write_toy_dataset
from .degrade import DegradationSpec, degrade, sample_spec
from .errors import (ConfigError, FormatError, GraphError, InputError,
                     RefineryError, ShapeError, TrainingAborted)
from .gradcheck import check_gradients
from .imageio import read_ppm, write_ppm
from .metrics import MetricReport, psnr, ssim
from .model import RefinementConfig, RefinementOutput, RefinerNetwork
from .params import load_checkpoint, save_checkpoint
from .priors import PriorVector, read_prior, stub_prior, write_prior
from .train import Adam, JointModel, TrainConfig, TrainResult, build_joint, evaluate_model, joint_loss, load_joint, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "BaselineRestorer", "ConfigError", "DegradationSpec", "FormatError",
    "GraphError", "InputError", "JointModel", "MetricReport", "PriorVector",
    "RefineryError", "RefinementConfig", "RefinementOutput", "RefinerNetwork",
    "Sample", "ShapeError", "Tensor", "TrainConfig", "TrainResult",
    "TrainingAborted", "backward", "build_joint", "check_gradients", "degrade",
    "evaluate_model", "joint_loss", "load_checkpoint", "load_dataset",
    "load_joint", "load_manifest", "no_grad", "psnr", "read_ppm", "read_prior",
    "sample_spec", "save_checkpoint", "ssim", "stub_prior", "synth_clean",
    "train", "write_ppm", "write_prior", "write_toy_dataset",
]
