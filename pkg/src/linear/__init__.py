"""
Per-mode linear solver, dense oracle and decay checks.
"""
from src.linear.characteristics import (
    LinearSeries,
    ModeCharacteristic,
    integrate_mode,
    integrate_spectrum,
    mode_rhs,
)
from src.linear.checks import (
    DecayFit,
    SpacetimeReport,
    check_derivative_norms,
    check_theta_decay,
    check_theta_multiplier_energy,
    check_wj_decay,
    spacetime_norms,
    theta_energy_residual,
)
from src.linear.oracle import dense_oracle

__all__ = [
    "DecayFit",
    "LinearSeries",
    "ModeCharacteristic",
    "SpacetimeReport",
    "check_derivative_norms",
    "check_theta_decay",
    "check_theta_multiplier_energy",
    "check_wj_decay",
    "dense_oracle",
    "integrate_mode",
    "integrate_spectrum",
    "mode_rhs",
    "spacetime_norms",
    "theta_energy_residual",
]
