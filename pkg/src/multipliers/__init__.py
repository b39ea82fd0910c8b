"""
Enhanced-dissipation multipliers and their pointwise certification.
"""
from src.multipliers.certification import (
    CertificationReport,
    certify_linear_inequalities,
    certify_nonlinear_inequalities,
)
from src.multipliers.profiles import XiZero, phi_k, phi_profile, solve_xi0
from src.multipliers.symbols import MultiplierSymbol, SymbolKind, build_symbol

__all__ = [
    "CertificationReport",
    "MultiplierSymbol",
    "SymbolKind",
    "XiZero",
    "build_symbol",
    "certify_linear_inequalities",
    "certify_nonlinear_inequalities",
    "phi_k",
    "phi_profile",
    "solve_xi0",
]
