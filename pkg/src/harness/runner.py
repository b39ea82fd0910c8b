"""
Subcommand handlers of the lab.

Each handler takes a validated run config, drives one module and writes its
artifacts under ``<output_dir>/<command>/``. Handlers return a CommandResult;
failed checks are results, not exceptions.
"""
import logging
import os
import re
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.config.run_config import (
    BudgetConfig,
    CertifyConfig,
    FitConfig,
    LinearConfig,
    NonlinearConfig,
)
from src.config.settings import Settings, get_settings
from src.harness.artifacts import read_csv, write_csv, write_summary
from src.harness.registry import ExperimentRegistry
from src.linear.characteristics import integrate_spectrum
from src.linear.checks import DecayFit, fit_decay, run_linear_checks, theta_rate_floor, wj_rate_floor
from src.linear.oracle import dense_oracle
from src.monitor.bootstrap import EnergyLedger, LedgerMonitor, bootstrap_monitor
from src.monitor.energy import cancellation_checks, energy_balance_residual, states_from_samples
from src.multipliers.certification import (
    CertificationReport,
    certify_linear_inequalities,
    certify_nonlinear_inequalities,
)
from src.nonlinear.checkpoint import load_trajectory, read_trajectory_meta, save_trajectory
from src.nonlinear.initial_data import build_initial_state, localized_field
from src.nonlinear.solver import NonlinearSolver
from src.nonlinear.state import SystemState
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams
from src.utils.errors import ConfigError, NumericalInstabilityError

logger = logging.getLogger(__name__)

NEGATIVE_CONTROLS = ("drop_m2", "drop_m3")
DEFAULT_NEGATIVE_CONTROL = "drop_m2"
ORACLE_TOLERANCE = 1e-6
COLUMN_PATTERN = re.compile(r"^(theta|wj)_k(-?\d+)$")


class CommandResult(BaseModel):
    """Outcome of one subcommand"""

    command: str
    passed: bool
    outputs: Dict[str, str] = Field(default_factory=dict)
    digest: Optional[str] = None
    summary: Dict[str, Any] = Field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


class ExperimentRunner:
    """
    Registers the subcommand handlers and dispatches configs to them.

    Nonlinear runs publish their events on the runner's registry, so external
    subscribers see every sample, checkpoint and divergence.
    """

    def __init__(
        self,
        settings: Optional[Settings] = None,
        output_dir: Optional[str] = None,
        registry: Optional[ExperimentRegistry] = None,
    ):
        self.settings = settings or get_settings()
        self.output_dir = output_dir or self.settings.OUTPUT_DIR
        self.registry = registry or ExperimentRegistry()
        self.registry.register_command("certify", self.run_certify)
        self.registry.register_command("linear", self.run_linear)
        self.registry.register_command("nonlinear", self.run_nonlinear)
        self.registry.register_command("budget", self.run_budget)
        self.registry.register_command("fit", self.run_fit)

    async def dispatch(self, command: str, config: BaseModel) -> CommandResult:
        """
        Run one subcommand.

        Raises:
            ValueError: If the command is not registered
        """
        handler = self.registry.get_command(command)
        logger.info(f"Dispatching {command}")
        result = await handler(config)
        logger.info(f"{command} finished: {'passed' if result.passed else 'failed'}")
        return result

    def _path(self, command: str, name: str) -> str:
        return os.path.join(self.output_dir, command, name)

    def _rng(self, seed: Optional[int]) -> np.random.Generator:
        return np.random.default_rng(self.settings.DEFAULT_SEED if seed is None else seed)

    def _summarize(self, command: str, config: BaseModel, body: Dict[str, Any], outputs: Dict[str, str]) -> CommandResult:
        path = self._path(command, f"{command}.json")
        digest = write_summary(path, command, config, body, self.settings.SCHEMA_VERSION)
        outputs = {**outputs, "summary": path}
        return CommandResult(command=command, passed=bool(body["passed"]), outputs=outputs, digest=digest, summary=body)

    # certify

    def _certify_nu(self, config: CertifyConfig, nu: float, corrupt: Optional[str] = None) -> List[CertificationReport]:
        xi_range = (-config.xi_extent, config.xi_extent) if config.xi_extent else None
        reports = []
        if corrupt is None and "linear" in config.families:
            reports.append(
                certify_linear_inequalities(nu, config.kset, xi_range, config.depth, config.eta, self.settings)
            )
        if corrupt is not None or "nonlinear" in config.families:
            reports.append(
                certify_nonlinear_inequalities(nu, config.kset, xi_range, config.depth, corrupt, self.settings)
            )
        return reports

    async def run_certify(self, config: CertifyConfig) -> CommandResult:
        """
        Certify the multiplier inequalities at every nu.

        With the nonlinear family requested, both corrupted multipliers are
        scanned as well; the requested negative control must fail.
        """
        reports: List[CertificationReport] = []
        for nu in config.nus:
            reports.extend(self._certify_nu(config, nu))
        certified = all(r.passed for r in reports)

        controls: Dict[str, Dict[str, Any]] = {}
        requested = config.negative_control or DEFAULT_NEGATIVE_CONTROL
        if "nonlinear" in config.families:
            for variant in NEGATIVE_CONTROLS:
                failures = []
                for nu in config.nus:
                    for report in self._certify_nu(config, nu, corrupt=variant):
                        failures.extend({"nu": nu, "k": k, "inequality": name} for k, name in report.failures())
                controls[variant] = {"failed": bool(failures), "failures": failures}
                level = logging.INFO if failures else logging.WARNING
                logger.log(level, f"Negative control {variant}: {len(failures)} failing scans")
        control_ok = controls.get(requested, {"failed": True})["failed"]

        body = {
            "passed": certified and control_ok,
            "certified": certified,
            "negative_control": requested,
            "negative_control_failed": control_ok,
            "negative_controls": controls,
            "min_margins": [{"family": r.family, "nu": r.nu, "margins": r.min_margins()} for r in reports],
            "roundoff_passes": [
                {"family": r.family, "nu": r.nu, "k": k, "inequality": name} for r in reports for k, name in r.roundoff_passes()
            ],
            "reports": reports,
        }
        return self._summarize("certify", config, body, {})

    # linear

    def _linear_init(self, grid: GridSpec, params: PhysParams, rng: np.random.Generator, kmax: int, width: float) -> SystemState:
        fields = [localized_field(grid, rng, kmax=kmax, width=width) for _ in range(3)]
        return SystemState(w=fields[0], j=fields[1], theta=fields[2], t=0.0, params=params)

    def _oracle_discrepancy(self, config: LinearConfig, grid: GridSpec, rng: np.random.Generator, kmax: int) -> List[float]:
        out = []
        for n in range(config.oracle_samples):
            init = self._linear_init(grid, config.params, rng, kmax, config.width)
            series = integrate_spectrum(init, config.oracle_t, dt=config.dt, sample_dt=config.oracle_t)
            exact = dense_oracle(init, config.oracle_t, self.settings).stack()
            scale = float(np.linalg.norm(exact))
            error = float(np.linalg.norm(series.data[-1] - exact))
            out.append(error / scale if scale > 0.0 else error)
            logger.debug(f"Oracle sample {n}: relative discrepancy {out[-1]:.3e}")
        return out

    async def run_linear(self, config: LinearConfig) -> CommandResult:
        """Integrate the linear system and run the decay and space-time checks."""
        grid = config.grid.to_grid(self.settings)
        rng = self._rng(config.seed)
        kmax = max(abs(k) for k in config.kset)
        init = self._linear_init(grid, config.params, rng, kmax, config.width)
        series = integrate_spectrum(init, config.t_max, dt=config.dt, sample_dt=config.sample_dt)
        checks = run_linear_checks(series, config.kset, config.params.b)
        fits: List[DecayFit] = checks["fits"]
        spacetime = checks["spacetime"]
        passed = all(f.passed for f in fits) and bool(np.isfinite(spacetime.measured_constant))
        residual = checks["theta_energy_residual"]
        gated = config.energy_tolerance is not None
        energy = {
            "residual": residual,
            "tolerance": config.energy_tolerance,
            "informational": not gated,
            "passed": residual <= config.energy_tolerance if gated else None,
        }
        if gated:
            passed = passed and energy["passed"]

        body: Dict[str, Any] = {
            "fits": fits,
            "theta_energy": energy,
            "spacetime": spacetime,
            "ly": grid.ly,
        }
        if config.oracle:
            discrepancies = self._oracle_discrepancy(config, grid, rng, kmax)
            oracle_ok = max(discrepancies) <= ORACLE_TOLERANCE
            body["oracle"] = {"discrepancies": discrepancies, "tolerance": ORACLE_TOLERANCE, "passed": oracle_ok}
            passed = passed and oracle_ok
        body["passed"] = passed

        outputs = {
            "csv": write_csv(self._path("linear", "linear.csv"), series.to_columns(), config, self.settings.SCHEMA_VERSION),
            "trajectory": save_trajectory(
                self._path("linear", "trajectory.npz"), grid, config.params, series.times, series.data,
                self.settings.SCHEMA_VERSION, {"nonlinear": False, "config": config.model_dump(mode="json")},
            ),
        }
        return self._summarize("linear", config, body, outputs)

    # nonlinear

    async def _nonlinear_once(self, config: NonlinearConfig, eps: float, tag: str) -> Tuple[Dict[str, Any], Dict[str, str]]:
        grid = config.grid.to_grid(self.settings)
        params = config.params
        env = config.envelope
        state = build_initial_state(
            grid, params, eps, env.alpha, env.beta, env.delta, self._rng(config.seed), config.fill, config.kmax
        )
        run_dir = self._path("nonlinear", tag)
        ledger = EnergyLedger(params=params, b=params.b)
        queue = self.registry.subscribe("trajectory_sample")
        monitor = LedgerMonitor(ledger, queue)
        monitor.start()
        solver = NonlinearSolver(settings=self.settings, output_dir=run_dir, registry=self.registry)
        try:
            trajectory = await solver.run(state, config.t_max, config.dt, config.sample_every)
        finally:
            await monitor.drain()
            self.registry.unsubscribe("trajectory_sample", queue)

        identity_failures = []
        if config.check_identities:
            for sample in trajectory.states:
                report = cancellation_checks(sample, sample.t, params.b)
                if not report.passed:
                    identity_failures.append({"t": sample.t, "failures": report.failures})

        C2 = None
        if env.calibrate_c2:
            measured = ledger.measured_constants()["C2"]
            C2 = measured if measured > 0.0 else None
            logger.info(f"Calibrated C2={measured:.6g} at eps={eps:.3g}")
        try:
            envelope = env.to_envelope(eps, C2)
        except ValidationError as e:
            raise ConfigError(f"Calibrated envelope is inadmissible: {e}") from e
        verdict = bootstrap_monitor(ledger, envelope)

        outputs = {
            "ledger": write_csv(
                os.path.join(run_dir, "ledger.csv"), ledger.to_columns(envelope), config, self.settings.SCHEMA_VERSION
            ),
            "trajectory": trajectory.save(
                os.path.join(run_dir, "trajectory.npz"), self.settings.SCHEMA_VERSION,
                {"nonlinear": True, "eps": eps, "config": config.model_dump(mode="json")},
            ),
        }
        run = {
            "eps": eps,
            "envelope": envelope,
            "verdict": verdict,
            "identity_failures": identity_failures,
            "ledger_errors": monitor.errors,
            "steps": len(trajectory.stats),
            "max_cfl": max((s.cfl for s in trajectory.stats), default=0.0),
            "passed": verdict.passed and not identity_failures and not monitor.errors,
        }
        return run, outputs

    async def run_nonlinear(self, config: NonlinearConfig) -> CommandResult:
        """
        Run the nonlinear solver under the energy monitor.

        In sweep mode eps runs down the sweep list and stops at the first
        value whose run passes; that value is reported as the largest passing eps.
        A diverging eps is recorded with its dump and the sweep moves on; a
        single run re-raises the divergence.
        """
        values = sorted(config.sweep, reverse=True) if config.run_sweep else [config.eps]
        runs = []
        outputs: Dict[str, str] = {}
        largest = None
        for index, eps in enumerate(values):
            tag = f"run{index:02d}"
            logger.info(f"Nonlinear run {tag} at eps={eps:.3g}")
            try:
                run, files = await self._nonlinear_once(config, eps, tag)
            except NumericalInstabilityError as e:
                if not config.run_sweep:
                    raise
                logger.error(f"Run {tag} diverged at eps={eps:.3g}: {e}")
                runs.append({"eps": eps, "passed": False, "diverged": True, "error": str(e), "dump_path": e.dump_path})
                if e.dump_path:
                    outputs[f"{tag}_dump"] = e.dump_path
                continue
            runs.append(run)
            outputs.update({f"{tag}_{name}": path for name, path in files.items()})
            if run["passed"]:
                largest = eps
                break
        body = {"runs": runs, "largest_passing_eps": largest, "passed": largest is not None}
        if config.run_sweep:
            logger.info(f"Largest passing eps: {largest}")
        return self._summarize("nonlinear", config, body, outputs)

    # budget

    async def run_budget(self, config: BudgetConfig) -> CommandResult:
        """Energy-balance residuals over a stored trajectory."""
        if not os.path.exists(config.trajectory):
            raise ConfigError(f"Trajectory not found: {config.trajectory}")
        try:
            meta = read_trajectory_meta(config.trajectory)
            grid, params, times, data = load_trajectory(config.trajectory)
            states = states_from_samples(grid, params, times, data)
            nonlinear = config.nonlinear
            if nonlinear is None:
                nonlinear = bool(meta.get("extra", {}).get("nonlinear", True))
            b = config.b or params.b
            residuals = {kind: energy_balance_residual(states, kind, b, nonlinear) for kind in config.kinds}
        except ValueError as e:
            logger.error(f"Cannot evaluate the energy budget of {config.trajectory}: {e}")
            raise ConfigError(str(e)) from e
        body = {
            "residuals": residuals,
            "nonlinear": nonlinear,
            "samples": len(states),
            "tolerance": config.tolerance,
            "passed": all(value <= config.tolerance for value in residuals.values()),
        }
        return self._summarize("budget", config, body, {})

    # fit

    async def run_fit(self, config: FitConfig) -> CommandResult:
        """Re-fit decay rates from a linear CSV and compare with the rate floors."""
        if not os.path.exists(config.csv):
            raise ConfigError(f"CSV not found: {config.csv}")
        columns, meta = read_csv(config.csv)
        if "t" not in columns:
            raise ConfigError(f"{config.csv} has no t column")
        params = config.params
        if params is None:
            params = PhysParams(**meta.get("config", {}).get("params", {}))
        available = sorted({int(m.group(2)) for m in map(COLUMN_PATTERN.match, columns) if m})
        kset = config.kset if config.kset is not None else available
        missing = [k for k in kset if k not in available]
        if missing:
            raise ConfigError(f"{config.csv} has no columns for k={missing}")

        fits = []
        for k in kset:
            for kind, floor in (
                ("theta", theta_rate_floor(params.eta, k)),
                ("wj", wj_rate_floor(params.nu, k)),
            ):
                rate, prefactor = fit_decay(columns["t"], columns[f"{kind}_k{k}"])
                fits.append(
                    DecayFit(k=k, kind=kind, rate=rate, prefactor=prefactor, rate_floor=floor, passed=rate >= floor)
                )
        body = {"params": params, "fits": fits, "passed": all(f.passed for f in fits)}
        return self._summarize("fit", config, body, {})
