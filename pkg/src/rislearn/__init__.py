"""Learning-centric resource allocation for surface-assisted edge learning.

Jointly tunes user transmit powers, receive beamformers, and the passive
surface's phase shifts to minimize the worst per-task classification error
across heterogeneous uplink learning tasks, with benchmark schemes and
scaling experiments built on the same primitives.
"""

from .linalg import EigDecomposition, IllConditionedError, hermitian_eig, solve_linear
from .metrics import (AllocationState, composite_channel, composite_channels, objective,
                      sample_count, sinr, spectral_efficiency, task_error)
from .phase import (QuadraticForms, admm_feasibility, build_quadratics, gamma_from_delta,
                    optimize_theta)
from .pipeline import (SCHEMES, alternating_optimize, monte_carlo, run_scheme,
                       scaling_experiment)
from .power import SurrogateContext, optimize_power, solve_subproblem, surrogate_value
from .beamforming import optimal_beamformer, optimal_beamformers_all
from .scenario import (ChannelSet, SystemConfig, TaskModel, TASK_PRESETS, fit_error_model,
                       generate_channels, task_preset, trial_seed)

__version__ = "0.1.0"

__all__ = [
    "AllocationState",
    "ChannelSet",
    "EigDecomposition",
    "IllConditionedError",
    "QuadraticForms",
    "SCHEMES",
    "SurrogateContext",
    "SystemConfig",
    "TASK_PRESETS",
    "TaskModel",
    "admm_feasibility",
    "alternating_optimize",
    "build_quadratics",
    "composite_channel",
    "composite_channels",
    "fit_error_model",
    "gamma_from_delta",
    "generate_channels",
    "hermitian_eig",
    "monte_carlo",
    "objective",
    "optimal_beamformer",
    "optimal_beamformers_all",
    "optimize_power",
    "optimize_theta",
    "run_scheme",
    "sample_count",
    "scaling_experiment",
    "sinr",
    "solve_linear",
    "solve_subproblem",
    "spectral_efficiency",
    "surrogate_value",
    "task_error",
    "task_preset",
    "trial_seed",
]
