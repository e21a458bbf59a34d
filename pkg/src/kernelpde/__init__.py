"""Meshless PDE solving with trainable kernel expansions.

Spatial derivatives are exact (second-order forward algebra), parameter
gradients are exact (reverse tape over that algebra), and classical
finite-difference/finite-volume oracles validate every benchmark.
"""

from .hyperdual import EvaluationError, HyperDual, lift
from .kernels import Gaussian, Mlp, ReluHat, SoftplusHat, kernel_from_name
from .loss import LossConfig, build_samples, collocation_loss, variational_loss
from .model import (AnalyticModel, FourierModel, ModelParams, eval_fourier,
                    eval_plain, eval_pou, init_nodes, spatial_derivs)
from .optimizer import AdamState, adam_step, train
from .problems import (ProblemSpec, error_metrics, make_problem, residual_eval,
                       sample_boundary, sample_interior)
from .records import RunRecord
from .tape import Tape, loss_gradient
from .timestepping import MarchConfig, fd_spinn_step, march, spacetime_problem

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AnalyticModel", "EvaluationError", "FourierModel", "Gaussian",
    "HyperDual", "LossConfig", "MarchConfig", "Mlp", "ModelParams",
    "ProblemSpec", "ReluHat", "RunRecord", "SoftplusHat", "Tape", "adam_step",
    "build_samples", "collocation_loss", "error_metrics", "eval_fourier",
    "eval_plain", "eval_pou", "fd_spinn_step", "init_nodes", "kernel_from_name",
    "lift", "loss_gradient", "make_problem", "march", "residual_eval",
    "sample_boundary", "sample_interior", "spacetime_problem", "spatial_derivs",
    "train", "variational_loss",
]
