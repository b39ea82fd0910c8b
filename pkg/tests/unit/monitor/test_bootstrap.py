"""
Unit tests for the energy ledger and the bootstrap envelope monitor
"""
import asyncio
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.harness.registry import ExperimentRegistry
from src.monitor.bootstrap import BootstrapEnvelope, EnergyLedger, LedgerMonitor, bootstrap_monitor
from src.nonlinear.initial_data import build_initial_state
from src.nonlinear.solver import NonlinearSolver
from src.nonlinear.state import SystemState
from src.spectral.params import PhysParams

B = 1.1
BETA = 5.5
DELTA = BETA + 13.0 / 3.0
ALPHA = DELTA - BETA + 14.0 / 3.0


@pytest.fixture
def params() -> PhysParams:
    return PhysParams(nu=0.5, mu=0.5, eta=0.5, b=B)


def _envelope(eps: float, /, **changes) -> BootstrapEnvelope:
    values = {"eps": eps, "alpha": ALPHA, "beta": BETA, "delta": DELTA}
    values.update(changes)
    return BootstrapEnvelope(**values)


def test_envelope_resolves_constant_from_closing_condition():
    """Test C defaults to max(80, 40 sqrt(C2) C~)"""
    assert _envelope(1e-3).C == pytest.approx(40.0 * 32.0)
    assert _envelope(1e-3, C2=1e-4).C == pytest.approx(80.0)
    assert _envelope(1e-3, C=5000.0, Ctilde=64.0).C == 5000.0


@pytest.mark.parametrize(
    "changes,message",
    [
        ({"beta": 5.0}, "beta must be >= 11/2"),
        ({"delta": BETA + 4.0}, "delta must be"),
        ({"alpha": ALPHA - 0.5}, "alpha must be"),
        ({"Ctilde": 16.0}, "Ctilde must be >= 32"),
        ({"C": 60.0, "C2": 1e-6}, "C must be >= 80"),
        ({"C": 100.0}, "40 sqrt"),
        ({"eps": -1.0}, "greater than or equal"),
    ],
)
def test_envelope_rejects_inadmissible_values(changes, message):
    """Test the exponent thresholds and constant conditions"""
    with pytest.raises(ValidationError, match=message):
        _envelope(1e-3, **changes)


async def _ledger_run(settings, tmp_path, state, t_max, dt) -> EnergyLedger:
    registry = ExperimentRegistry()
    ledger = EnergyLedger(params=state.params, b=B)
    monitor = LedgerMonitor(ledger, registry.subscribe("trajectory_sample"))
    monitor.start()
    solver = NonlinearSolver(settings=settings, output_dir=str(tmp_path), registry=registry)
    trajectory = await solver.run(state, t_max, dt)
    await monitor.drain()
    assert monitor.errors == []
    assert len(ledger) == len(trajectory.states)
    return ledger


async def test_zero_run_keeps_full_margins(settings, tmp_path, small_grid, params, rng):
    """Test eps = 0 is stationary and every margin equals its bound"""
    state = build_initial_state(small_grid, params, 0.0, ALPHA, BETA, DELTA, rng)
    ledger = await _ledger_run(settings, tmp_path, state, 0.2, 0.05)
    verdict = bootstrap_monitor(ledger, _envelope(0.0))
    assert verdict.passed
    assert verdict.max_improvement == 0.0
    for name, margins in verdict.margins.items():
        assert margins == [verdict.bounds[name]] * len(ledger)
    assert ledger.column("E_theta").max() == 0.0


async def test_admissible_run_improves_the_ansatz(settings, tmp_path, small_grid, params, rng):
    """Test small data stays below half of every envelope"""
    eps = 1e-3
    state = build_initial_state(small_grid, params, eps, ALPHA, BETA, DELTA, rng)
    ledger = await _ledger_run(settings, tmp_path, state, 0.5, 0.025)
    verdict = bootstrap_monitor(ledger, _envelope(eps))

    assert verdict.passed
    assert 0.0 < verdict.max_improvement <= 0.5
    assert all(value > 0.0 for value in verdict.min_margins.values())
    assert verdict.richardson_ok, verdict.richardson_change
    assert all(0.0 <= value < math.inf for value in verdict.measured_constants.values())
    assert len(verdict.times) == len(ledger) == 21


async def test_ledger_columns_and_running_norms(settings, tmp_path, small_grid, params, rng):
    """Test the ansatz left-hand sides are nondecreasing and exported with margins"""
    state = build_initial_state(small_grid, params, 1e-3, ALPHA, BETA, DELTA, rng)
    ledger = await _ledger_run(settings, tmp_path, state, 0.2, 0.05)
    lhs = ledger.ansatz_lhs()
    for name in ("theta", "wj", "theta_dx"):
        assert np.all(np.diff(lhs[name]) >= 0.0)
    np.testing.assert_allclose(lhs["wj"], lhs["w"] + lhs["j"])

    envelope = _envelope(1e-3)
    columns = ledger.to_columns(envelope)
    bounds = envelope.bounds(params.nu)
    np.testing.assert_allclose(columns["margin_theta"], bounds["theta"] - columns["lhs_theta"])
    for name in ("t", "E_theta", "E_theta_dx", "I1", "I10", "ratio_I9"):
        assert columns[name].shape == (len(ledger),)


def test_ledger_rejects_out_of_order_samples(small_grid, params):
    """Test ledger rows must advance in time"""
    ledger = EnergyLedger(params=params, b=B)
    ledger.record(SystemState.zeros(small_grid, params, t=0.5))
    with pytest.raises(ValueError, match="increase in time"):
        ledger.record(SystemState.zeros(small_grid, params, t=0.5))


def test_empty_ledger_reports_nothing(params):
    """Test an empty ledger has empty columns and zero constants"""
    ledger = EnergyLedger(params=params, b=B)
    assert ledger.to_columns() == {}
    assert ledger.measured_constants() == {"C1": 0.0, "C2": 0.0, "C3": 0.0, "product": 0.0}
    assert ledger.richardson_change() == {}


async def test_monitor_survives_unexpected_ledger_errors(params, mocker):
    """Test any failure while recording is kept and drain still returns"""
    ledger = EnergyLedger(params=params, b=B)
    mocker.patch.object(ledger, "record", side_effect=ZeroDivisionError("division by zero"))
    queue = asyncio.Queue()
    for index in range(3):
        queue.put_nowait({"data": {"state": None, "index": index}})
    monitor = LedgerMonitor(ledger, queue)
    monitor.start()
    await asyncio.wait_for(monitor.drain(), timeout=2.0)
    assert len(monitor.errors) == 3
    assert monitor.errors[0].startswith("ZeroDivisionError")
