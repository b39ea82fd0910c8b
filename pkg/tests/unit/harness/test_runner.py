"""
Unit tests for the subcommand handlers
"""
import math
import os

import numpy as np
import pytest

from src.config.run_config import (
    BudgetConfig,
    CertifyConfig,
    EnvelopeConfig,
    FitConfig,
    GridConfig,
    LinearConfig,
    NonlinearConfig,
)
from src.harness.artifacts import read_csv, read_summary, verify_digest
from src.harness.registry import ExperimentRegistry
from src.harness.runner import ExperimentRunner
from src.linear.checks import run_linear_checks
from src.multipliers.certification import CertificationReport, InequalityResult, KScan
from src.nonlinear.checkpoint import load_trajectory, read_trajectory_meta
from src.spectral.params import PhysParams
from src.utils.errors import ConfigError, NumericalInstabilityError

SMALL_GRID = GridConfig(nx=8, ny=32, ly=8.0 * math.pi)
HALF = PhysParams(nu=0.5, mu=0.5, eta=0.5, b=1.1)


@pytest.fixture
def runner(settings, tmp_path) -> ExperimentRunner:
    return ExperimentRunner(settings=settings, output_dir=str(tmp_path))


def _report(family: str, passed: bool, corrupt=None) -> CertificationReport:
    result = InequalityResult(
        name="nonlinear_shear", interval=(-1.0, 1.0), min_margin=1.0 if passed else -1.0,
        raw_min_margin=1.0 if passed else -1.0, argmin_xi=0.0, n_points=3, levels_used=0,
        tight_cells=0, passed=passed,
    )
    return CertificationReport(
        family=family, nu=0.1, eta=0.1, kset=[1], depth=2, corrupt=corrupt, rtol=1e-9, safety=2.0,
        scans=[KScan(k=1, results=[result])], passed=passed,
    )


def test_runner_registers_every_subcommand(runner):
    """Test the five subcommands are dispatchable"""
    assert set(runner.registry.commands) == {"certify", "linear", "nonlinear", "budget", "fit"}


async def test_dispatch_rejects_unknown_command(runner):
    """Test an unregistered name is refused"""
    with pytest.raises(ValueError, match="Command not found"):
        await runner.dispatch("plot", CertifyConfig())


async def test_certify_requires_the_negative_control_to_fail(runner, tmp_path):
    """Test the certification passes with the reference multiplier and a failing drop_m2"""
    config = CertifyConfig(nus=[0.1], kset=[1], depth=6)
    result = await runner.dispatch("certify", config)
    assert result.passed, result.summary["reports"]
    assert result.exit_code == 0
    assert result.summary["negative_control"] == "drop_m2"
    controls = result.summary["negative_controls"]
    assert controls["drop_m2"]["failed"]
    assert {"nu": 0.1, "k": 1, "inequality": "nonlinear_shear"} in controls["drop_m2"]["failures"]
    assert set(controls) == {"drop_m2", "drop_m3"}

    payload = read_summary(result.outputs["summary"])
    assert payload["config"]["kset"] == [1]
    assert verify_digest(payload)
    assert [r["family"] for r in payload["reports"]] == ["linear", "nonlinear"]
    assert isinstance(payload["roundoff_passes"], list)


async def test_certify_fails_when_requested_control_passes(runner, mocker):
    """Test a negative control that certifies turns the run into a failure"""

    def fake(nu, kset, xi_range=None, depth=12, corrupt=None, settings=None):
        return _report("nonlinear", corrupt != "drop_m2", corrupt)

    mocker.patch("src.harness.runner.certify_nonlinear_inequalities", side_effect=fake)
    config = CertifyConfig(nus=[0.1], kset=[1], families=["nonlinear"], negative_control="drop_m3")
    result = await runner.dispatch("certify", config)
    assert result.summary["certified"]
    assert not result.summary["negative_control_failed"]
    assert not result.passed
    assert result.exit_code == 1

    config = CertifyConfig(nus=[0.1], kset=[1], families=["nonlinear"], negative_control="drop_m2")
    assert (await runner.dispatch("certify", config)).passed


async def test_certify_reports_failing_scans(runner, mocker):
    """Test a failing reference scan fails the run"""
    mocker.patch("src.harness.runner.certify_linear_inequalities", return_value=_report("linear", False))
    result = await runner.dispatch("certify", CertifyConfig(nus=[1.0], kset=[1], depth=4))
    assert not result.summary["certified"]
    assert not result.passed


async def test_linear_run_writes_series_and_checks(runner):
    """Test the linear decay checks pass and the CSV and trajectory are written"""
    config = LinearConfig(
        params=PhysParams(nu=1.0, mu=1.0, eta=1.0, b=1.1), grid=SMALL_GRID, t_max=12.0, dt=0.01,
        sample_dt=0.25, kset=[1], seed=1234,
    )
    result = await runner.dispatch("linear", config)
    assert result.passed, [f for f in result.summary["fits"] if not f.passed]
    assert "oracle" not in result.summary
    assert np.isfinite(result.summary["spacetime"].measured_constant)

    columns, meta = read_csv(result.outputs["csv"])
    assert columns["t"][-1] == pytest.approx(12.0)
    assert columns["theta_k1"][-1] < columns["theta_k1"][0]
    assert meta["config"]["kset"] == [1]
    grid, params, times, data = load_trajectory(result.outputs["trajectory"])
    assert params == config.params
    assert data.shape == (times.size, 3, 8, 32)
    assert read_trajectory_meta(result.outputs["trajectory"])["extra"]["nonlinear"] is False


@pytest.mark.parametrize("tolerance,passed", [(None, True), (1e-6, False)])
async def test_linear_energy_residual_gates_only_with_tolerance(runner, mocker, tolerance, passed):
    """Test a broken theta energy identity fails the run once a tolerance is configured"""
    real = run_linear_checks
    mocker.patch(
        "src.harness.runner.run_linear_checks",
        side_effect=lambda *args: {**real(*args), "theta_energy_residual": 1e-2},
    )
    config = LinearConfig(
        params=PhysParams(nu=1.0, mu=1.0, eta=1.0, b=1.1), grid=SMALL_GRID, t_max=12.0, dt=0.01,
        sample_dt=0.25, kset=[1], seed=1234, energy_tolerance=tolerance,
    )
    result = await runner.dispatch("linear", config)
    energy = result.summary["theta_energy"]
    assert energy["residual"] == 1e-2
    assert energy["informational"] is (tolerance is None)
    assert result.passed is passed


async def test_linear_run_with_oracle(runner):
    """Test the dense oracle cross-check on localized data"""
    config = LinearConfig(
        params=PhysParams(nu=0.1, mu=0.1, eta=0.1, b=1.1),
        grid=GridConfig(nx=8, ny=128, ly=16.0 * math.pi, dealias=False),
        t_max=1.0, dt=0.01, sample_dt=0.5, kset=[1], oracle=True, oracle_samples=2, oracle_t=4.0, seed=7,
    )
    result = await runner.dispatch("linear", config)
    oracle = result.summary["oracle"]
    assert oracle["passed"]
    assert len(oracle["discrepancies"]) == 2
    assert max(oracle["discrepancies"]) <= 1e-6


async def test_linear_run_is_deterministic(settings, tmp_path):
    """Test the same config and seed give byte-identical artifacts"""
    config = LinearConfig(grid=SMALL_GRID, t_max=1.0, dt=0.01, sample_dt=0.25, kset=[1], seed=3)
    first = await ExperimentRunner(settings=settings, output_dir=str(tmp_path / "a")).dispatch("linear", config)
    second = await ExperimentRunner(settings=settings, output_dir=str(tmp_path / "b")).dispatch("linear", config)
    for name in ("summary", "csv"):
        with open(first.outputs[name], "rb") as a, open(second.outputs[name], "rb") as b:
            assert a.read() == b.read()
    assert first.digest == second.digest


def _nonlinear_config(**changes) -> NonlinearConfig:
    values = dict(params=HALF, grid=SMALL_GRID, eps=1e-3, t_max=0.5, dt=0.025, sample_every=1, seed=1234)
    values.update(changes)
    return NonlinearConfig(**values)


async def test_nonlinear_run_passes_bootstrap(runner):
    """Test an admissible eps keeps every envelope and identity"""
    result = await runner.dispatch("nonlinear", _nonlinear_config())
    assert result.passed
    assert result.summary["largest_passing_eps"] == 1e-3
    run = result.summary["runs"][0]
    assert run["identity_failures"] == []
    assert run["ledger_errors"] == []
    assert run["verdict"].max_improvement <= 0.5
    assert run["steps"] == 20

    columns, _ = read_csv(result.outputs["run00_ledger"])
    assert columns["t"].size == 21
    assert np.all(columns["margin_theta"] > 0.0)
    assert os.path.exists(result.outputs["run00_trajectory"])
    assert runner.registry.event_queues["trajectory_sample"] == []


async def test_nonlinear_run_calibrates_c2(runner):
    """Test the measured C2 replaces the configured one"""
    config = _nonlinear_config(envelope=EnvelopeConfig(calibrate_c2=True), t_max=0.1)
    result = await runner.dispatch("nonlinear", config)
    run = result.summary["runs"][0]
    measured = run["verdict"].measured_constants["C2"]
    assert run["envelope"].C2 == pytest.approx(measured)
    assert run["verdict"].closing_condition


async def test_sweep_stops_at_first_passing_eps(runner, mocker):
    """Test the sweep runs down the list and reports the largest passing eps"""
    calls = []

    async def fake(config, eps, tag):
        calls.append((eps, tag))
        return {"eps": eps, "passed": eps <= 1e-3}, {"ledger": f"{tag}.csv"}

    mocker.patch.object(runner, "_nonlinear_once", side_effect=fake)
    config = _nonlinear_config(sweep=[1e-4, 1e-1, 1e-3, 1e-2], run_sweep=True)
    result = await runner.run_nonlinear(config)
    assert calls == [(1e-1, "run00"), (1e-2, "run01"), (1e-3, "run02")]
    assert result.summary["largest_passing_eps"] == 1e-3
    assert result.passed
    assert result.outputs["run02_ledger"] == "run02.csv"


async def test_sweep_continues_past_a_diverging_eps(runner, mocker):
    """Test a divergence is recorded with its dump and smaller eps still run"""
    calls = []

    async def fake(config, eps, tag):
        calls.append(eps)
        if eps == 1e-1:
            raise NumericalInstabilityError("max amplitude grew", dump_path="dumps/diverged.npz")
        return {"eps": eps, "passed": True}, {"ledger": f"{tag}.csv"}

    mocker.patch.object(runner, "_nonlinear_once", side_effect=fake)
    result = await runner.run_nonlinear(_nonlinear_config(sweep=[1e-3, 1e-1], run_sweep=True))
    assert calls == [1e-1, 1e-3]
    diverged = result.summary["runs"][0]
    assert diverged["diverged"] and not diverged["passed"]
    assert diverged["dump_path"] == "dumps/diverged.npz"
    assert result.outputs["run00_dump"] == "dumps/diverged.npz"
    assert result.summary["largest_passing_eps"] == 1e-3
    assert result.passed


async def test_sweep_without_passing_eps_fails(runner, mocker):
    """Test a sweep with no passing value fails"""

    async def fake(config, eps, tag):
        return {"eps": eps, "passed": False}, {}

    mocker.patch.object(runner, "_nonlinear_once", side_effect=fake)
    result = await runner.run_nonlinear(_nonlinear_config(sweep=[1e-2, 1e-3], run_sweep=True))
    assert result.summary["largest_passing_eps"] is None
    assert result.exit_code == 1


async def test_nonlinear_instability_propagates(runner, mocker):
    """Test a divergence surfaces with its dump path and leaves no subscriber behind"""
    mocker.patch(
        "src.harness.runner.NonlinearSolver.run",
        side_effect=NumericalInstabilityError("max amplitude grew", dump_path="dumps/diverged.npz"),
    )
    with pytest.raises(NumericalInstabilityError) as info:
        await runner.dispatch("nonlinear", _nonlinear_config())
    assert info.value.dump_path == "dumps/diverged.npz"
    assert runner.registry.event_queues["trajectory_sample"] == []


async def test_budget_of_nonlinear_trajectory(settings, tmp_path):
    """Test the energy identities close on a finely sampled nonlinear run"""
    runner = ExperimentRunner(settings=settings, output_dir=str(tmp_path))
    run = await runner.dispatch("nonlinear", _nonlinear_config(t_max=0.05, dt=0.0025))
    config = BudgetConfig(trajectory=run.outputs["run00_trajectory"])
    result = await runner.dispatch("budget", config)
    assert result.passed, result.summary["residuals"]
    assert result.summary["nonlinear"] is True
    assert set(result.summary["residuals"]) == {"theta", "w", "j", "theta_dx"}


async def test_budget_of_linear_trajectory(runner):
    """Test the linear identities are used for a linear trajectory"""
    linear = await runner.dispatch(
        "linear",
        LinearConfig(params=HALF, grid=SMALL_GRID, t_max=0.05, dt=0.000625, sample_dt=0.0025, kset=[1], seed=5),
    )
    result = await runner.dispatch("budget", BudgetConfig(trajectory=linear.outputs["trajectory"]))
    assert result.summary["nonlinear"] is False
    assert result.passed, result.summary["residuals"]


async def test_budget_input_errors(runner, tmp_path):
    """Test missing and unusable trajectories are config errors"""
    with pytest.raises(ConfigError, match="not found"):
        await runner.dispatch("budget", BudgetConfig(trajectory=str(tmp_path / "missing.npz")))
    short = await runner.dispatch(
        "linear", LinearConfig(grid=SMALL_GRID, t_max=0.2, dt=0.01, sample_dt=0.1, kset=[1], seed=1)
    )
    with pytest.raises(ConfigError, match="at least 5"):
        await runner.dispatch("budget", BudgetConfig(trajectory=short.outputs["trajectory"]))


async def test_fit_refits_linear_csv(runner):
    """Test decay rates re-fitted from the CSV clear their floors"""
    config = LinearConfig(grid=SMALL_GRID, t_max=12.0, dt=0.01, sample_dt=0.25, kset=[1], seed=1234)
    linear = await runner.dispatch("linear", config)
    result = await runner.dispatch("fit", FitConfig(csv=linear.outputs["csv"], kset=[1]))
    assert result.passed
    assert result.summary["params"] == config.params
    fits = {(f.k, f.kind): f for f in result.summary["fits"]}
    assert set(fits) == {(1, "theta"), (1, "wj")}
    assert fits[(1, "theta")].rate >= fits[(1, "theta")].rate_floor

    auto = await runner.dispatch("fit", FitConfig(csv=linear.outputs["csv"]))
    assert {f.k for f in auto.summary["fits"]} == {-3, -2, -1, 0, 1, 2, 3}


async def test_fit_input_errors(runner, tmp_path):
    """Test a missing CSV and missing k columns are config errors"""
    with pytest.raises(ConfigError, match="not found"):
        await runner.dispatch("fit", FitConfig(csv=str(tmp_path / "missing.csv")))
    linear = await runner.dispatch(
        "linear", LinearConfig(grid=SMALL_GRID, t_max=0.5, dt=0.01, sample_dt=0.25, kset=[1], seed=1)
    )
    with pytest.raises(ConfigError, match="no columns for k=\\[5\\]"):
        await runner.dispatch("fit", FitConfig(csv=linear.outputs["csv"], kset=[5]))


def test_runner_uses_its_own_registry(settings, tmp_path):
    """Test an injected registry receives the handlers"""
    registry = ExperimentRegistry()
    ExperimentRunner(settings=settings, output_dir=str(tmp_path), registry=registry)
    assert callable(registry.get_command("budget"))
