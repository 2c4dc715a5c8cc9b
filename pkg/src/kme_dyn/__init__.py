"""Kernel mean embeddings for comparing and propagating uncertainty in dynamical systems."""

from ._backend import BACKEND
from .dynamics import (ContinuousSystem, DiscreteSystem, DynamicsError, TrajectoryEnsemble,
                       builtin_arx, integrate, iterate, linear_ode, random_walk_drift)
from .embedding import (Expansion, embed_uniform, embed_weighted, mmd, mmd_over_time,
                        rkhs_dist_sq, rkhs_norm_sq)
from .kernels import (Exponential, Gaussian, KernelError, KernelSpec, Linear, Polynomial,
                      eval_kernel, gram, kernel_from_config)
from .propagation import (ReducedSetConfig, ReductionError, approximation_error,
                          propagate_direct, propagate_reduced, reduce, ustat_step)
from . import uncertainty

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ContinuousSystem", "DiscreteSystem", "DynamicsError", "TrajectoryEnsemble",
    "builtin_arx", "integrate", "iterate", "linear_ode", "random_walk_drift",
    "Expansion", "embed_uniform", "embed_weighted", "mmd", "mmd_over_time",
    "rkhs_dist_sq", "rkhs_norm_sq",
    "Exponential", "Gaussian", "KernelError", "KernelSpec", "Linear", "Polynomial",
    "eval_kernel", "gram", "kernel_from_config",
    "ReducedSetConfig", "ReductionError", "approximation_error",
    "propagate_direct", "propagate_reduced", "reduce", "ustat_step",
    "uncertainty",
]
