"""Conjugate gradient vs. RMSprop training of bias-free MLPs in single and double precision."""

from cgbench.precision import PrecisionMode
from cgbench.network import ActivationKind, NetworkConfig, param_count, forward, mse, gradient
from cgbench.taskgen import Profile, TaskSpec, Dataset, generate_task, initial_params
from cgbench.linesearch import LineSearchStatus, line_search
from cgbench.optim import (
    CgConfig,
    RmsPropConfig,
    TerminationReason,
    NetworkProblem,
    QuadraticProblem,
    cg_minimize,
    rmsprop_minimize,
)

__version__ = "0.1.0"

__all__ = [
    "PrecisionMode",
    "ActivationKind",
    "NetworkConfig",
    "param_count",
    "forward",
    "mse",
    "gradient",
    "Profile",
    "TaskSpec",
    "Dataset",
    "generate_task",
    "initial_params",
    "LineSearchStatus",
    "line_search",
    "CgConfig",
    "RmsPropConfig",
    "TerminationReason",
    "NetworkProblem",
    "QuadraticProblem",
    "cg_minimize",
    "rmsprop_minimize",
]
