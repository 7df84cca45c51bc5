"""Switching null-control synthesis for finite-dimensional linear systems."""

from .linalg import expm, eigenvalues, numerical_rank, Spectrum
from .system import (LtiSystem, KalmanResult, kalman_check, ForbiddenSet,
                     forbidden_set_W, forbidden_set_next, FrequencyPlan, plan_frequencies)
from .adjoint import TimeGrid, AdjointTrace, propagate_adjoint, AdjointFlow
from .functional import (WeightFamily, Objective, MinimizationResult, NotControllableError,
                         eval_J, subgradient_J, el_residual, minimize)
from .switching import (ActivePartition, ControlSchedule, SwitchingControlSet, classify,
                        extract_controls, validate_switching)
from .simulate import Trajectory, integrate_forward, duality_check
from .pipeline import RunConfig, RunResult, synthesize
from .examples import (make_heat, make_wave, make_coupled_parabolic,
                       make_random_controllable, make_full_actuation)

__version__ = "0.1.0"

__all__ = [
    "expm", "eigenvalues", "numerical_rank", "Spectrum",
    "LtiSystem", "KalmanResult", "kalman_check", "ForbiddenSet", "forbidden_set_W",
    "forbidden_set_next", "FrequencyPlan", "plan_frequencies",
    "TimeGrid", "AdjointTrace", "propagate_adjoint", "AdjointFlow",
    "WeightFamily", "Objective", "MinimizationResult", "NotControllableError",
    "eval_J", "subgradient_J", "el_residual", "minimize",
    "ActivePartition", "ControlSchedule", "SwitchingControlSet", "classify",
    "extract_controls", "validate_switching",
    "Trajectory", "integrate_forward", "duality_check",
    "RunConfig", "RunResult", "synthesize",
    "make_heat", "make_wave", "make_coupled_parabolic", "make_random_controllable",
    "make_full_actuation",
]
