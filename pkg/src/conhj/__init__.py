"""Constrained Hamilton-Jacobi equations with a Lagrange-multiplier
constraint ``max_x u = 0``, their vanishing-viscosity approximation and the
optimal paths of the associated control problem."""

__version__ = "0.1.0"

from .diagnostics import DiagnosticsReport, Tolerances, diag_suite, sweep_eps
from .limit import LimitConfig, LimitSolution, enforce_constraint, make_limit_config, run_limit
from .model import ModelSpec, check_assumptions, resolve_model
from .numerics import Grid1D, SampledFunction, TimeGrid
from .trajectories import (
    MultiplierPath,
    Trajectory,
    action,
    max_point_trajectory,
    optimize_endpoint,
    shoot_from_initial,
)
from .viscous import ViscousConfig, ViscousSolution, make_viscous_config, run_viscous

__all__ = [
    "DiagnosticsReport",
    "Grid1D",
    "LimitConfig",
    "LimitSolution",
    "ModelSpec",
    "MultiplierPath",
    "SampledFunction",
    "TimeGrid",
    "Tolerances",
    "Trajectory",
    "ViscousConfig",
    "ViscousSolution",
    "action",
    "check_assumptions",
    "diag_suite",
    "enforce_constraint",
    "make_limit_config",
    "make_viscous_config",
    "max_point_trajectory",
    "optimize_endpoint",
    "resolve_model",
    "run_limit",
    "run_viscous",
    "shoot_from_initial",
    "sweep_eps",
]
