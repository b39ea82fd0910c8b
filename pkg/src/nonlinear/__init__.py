"""
Nonlinear Boussinesq-MHD solver in the moving frame.
"""
from src.nonlinear.checkpoint import (
    load_checkpoint,
    load_trajectory,
    read_trajectory_meta,
    save_checkpoint,
    save_trajectory,
)
from src.nonlinear.initial_data import build_initial_state, localized_field
from src.nonlinear.solver import NonlinearSolver, Trajectory, cfl_number, compute_Q, nonlinear_terms, rhs, transport
from src.nonlinear.state import FIELD_ORDER, StepStats, SystemState

__all__ = [
    "FIELD_ORDER",
    "NonlinearSolver",
    "StepStats",
    "SystemState",
    "Trajectory",
    "build_initial_state",
    "cfl_number",
    "compute_Q",
    "load_checkpoint",
    "load_trajectory",
    "localized_field",
    "nonlinear_terms",
    "read_trajectory_meta",
    "rhs",
    "save_checkpoint",
    "save_trajectory",
    "transport",
]
