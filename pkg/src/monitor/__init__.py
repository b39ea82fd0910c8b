"""
Energy monitor: weighted energies, pairing identities and bootstrap envelopes.
"""
from src.monitor.bootstrap import (
    BootstrapEnvelope,
    BootstrapVerdict,
    EnergyLedger,
    LedgerMonitor,
    bootstrap_monitor,
)
from src.monitor.energy import (
    BalanceTerms,
    IdentityReport,
    balance_terms,
    bound_chain_checks,
    cancellation_checks,
    compute_I_terms,
    energy_balance_residual,
    iterm_brackets,
    m_weighted_energy,
    states_from_samples,
)

__all__ = [
    "BalanceTerms",
    "BootstrapEnvelope",
    "BootstrapVerdict",
    "EnergyLedger",
    "IdentityReport",
    "LedgerMonitor",
    "balance_terms",
    "bootstrap_monitor",
    "bound_chain_checks",
    "cancellation_checks",
    "compute_I_terms",
    "energy_balance_residual",
    "iterm_brackets",
    "m_weighted_energy",
    "states_from_samples",
]
