"""Forward, adjoint and hole-sensitivity solvers for the viscous shallow water system."""

from .adjoint import AdjointTrajectory, backward_step, run_adjoint
from .core import (
    AdjointState,
    Bathymetry,
    BlowUpError,
    ConfigError,
    ConservedState,
    DomainError,
    GridSpec,
    OutOfDomainError,
    PerturbationShape,
    StabilityError,
    SweError,
    TargetField,
    TrajectoryError,
    ViscosityParams,
    make_grid,
)
from .corrector import CorrectorField, closed_form_corrector, solve_corrector_numeric
from .forward import Trajectory, cfl_dt, max_stable_dt, run_forward, step
from .objective import ObjectiveBreakdown, evaluate_j, evaluate_j_masked
from .topo import TDBreakdown, TDSample, evaluate_td, td_field
from .validation import DotProductReport, FDReport, affinity_check, dot_product_test, fd_td_oracle

__all__ = [
    "AdjointState",
    "AdjointTrajectory",
    "Bathymetry",
    "BlowUpError",
    "ConfigError",
    "ConservedState",
    "CorrectorField",
    "DomainError",
    "DotProductReport",
    "FDReport",
    "GridSpec",
    "ObjectiveBreakdown",
    "OutOfDomainError",
    "PerturbationShape",
    "StabilityError",
    "SweError",
    "TDBreakdown",
    "TDSample",
    "TargetField",
    "Trajectory",
    "TrajectoryError",
    "ViscosityParams",
    "affinity_check",
    "backward_step",
    "cfl_dt",
    "closed_form_corrector",
    "dot_product_test",
    "evaluate_j",
    "evaluate_j_masked",
    "evaluate_td",
    "fd_td_oracle",
    "make_grid",
    "max_stable_dt",
    "run_adjoint",
    "run_forward",
    "solve_corrector_numeric",
    "step",
    "td_field",
]
