"""
Pseudo-spectral solver for the full Boussinesq-MHD perturbation system.

States live in the moving frame. Physical samples of a sheared field are taken
in the sheared coordinates (x - s y, y); pointwise products are exact there, so
advection, the Lorentz terms and Q are formed on the sampling grid and filtered
with the 2/3 rule without ever remapping the frequency labels. Dissipation is
integrated exactly and everything else with the Lawson RK4 stages.
"""
import asyncio
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, NoReturn, Optional, Tuple

import numpy as np

from src.config.settings import Settings, get_settings
from src.harness.registry import ExperimentRegistry
from src.nonlinear.checkpoint import save_checkpoint, save_trajectory
from src.nonlinear.state import FIELD_ORDER, StepStats, SystemState
from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.operators import dx, dy, wrap_energy_fraction
from src.spectral.params import PhysParams
from src.spectral.timestepping import lawson_rk4_step, linear_forcing
from src.utils.errors import NumericalInstabilityError

logger = logging.getLogger(__name__)


def _filtered(grid: GridSpec, values: np.ndarray) -> Tuple[np.ndarray, float]:
    coef = grid.to_spectral(values)
    mask = grid.dealias_mask
    removed = float(grid.cell * np.sum(np.abs(coef[~mask]) ** 2))
    return np.where(mask, coef, 0.0), removed


def _gradient(f: SpectralField) -> Tuple[np.ndarray, np.ndarray]:
    return dx(f).to_physical(), dy(f).to_physical()


def _q_values(u1: SpectralField, u2: SpectralField, b1: SpectralField, b2: SpectralField) -> np.ndarray:
    u1_x, u1_y = _gradient(u1)
    b1_x, b1_y = _gradient(b1)
    u2_x = dx(u2).to_physical()
    b2_x = dx(b2).to_physical()
    return 2.0 * b1_x * (u2_x + u1_y) - 2.0 * u1_x * (b2_x + b1_y)


def compute_Q(u1: SpectralField, u2: SpectralField, b1: SpectralField, b2: SpectralField) -> SpectralField:
    """
    Stretching term 2 d_x b1 (d_x u2 + d_y u1) - 2 d_x u1 (d_x b2 + d_y b1).

    Args:
        u1, u2: Velocity components
        b1, b2: Magnetic components

    Returns:
        Dealiased Q in the frame of the inputs
    """
    for other in (u2, b1, b2):
        u1.check_compatible(other)
    coef, _ = _filtered(u1.grid, _q_values(u1, u2, b1, b2))
    return u1.with_coef(coef)


def transport(c1: SpectralField, c2: SpectralField, f: SpectralField) -> SpectralField:
    """Dealiased c . grad f for a transporting pair (c1, c2)."""
    c1.check_compatible(f)
    f_x, f_y = _gradient(f)
    coef, _ = _filtered(f.grid, c1.to_physical() * f_x + c2.to_physical() * f_y)
    return f.with_coef(coef)


def nonlinear_terms(state: SystemState) -> Tuple[np.ndarray, float]:
    """
    Quadratic terms of the three equations in FIELD_ORDER.

    theta: -u.grad theta
    w: -u.grad w + b.grad j
    j: -u.grad j + b.grad w + Q

    Returns:
        Tuple of (coefficients of shape (3, nx, ny), energy removed by the mask)
    """
    grid = state.grid
    u1, u2 = state.velocity()
    b1, b2 = state.magnetic()
    pu1, pu2, pb1, pb2 = (f.to_physical() for f in (u1, u2, b1, b2))
    theta_x, theta_y = _gradient(state.theta)
    w_x, w_y = _gradient(state.w)
    j_x, j_y = _gradient(state.j)

    values = (
        -(pu1 * theta_x + pu2 * theta_y),
        -(pu1 * w_x + pu2 * w_y) + pb1 * j_x + pb2 * j_y,
        -(pu1 * j_x + pu2 * j_y) + pb1 * w_x + pb2 * w_y + _q_values(u1, u2, b1, b2),
    )
    out = np.empty((3,) + grid.shape, dtype=complex)
    removed = 0.0
    for i, term in enumerate(values):
        out[i], lost = _filtered(grid, term)
        removed += lost
    return out, removed


def _label_grid(grid: GridSpec) -> np.ndarray:
    return np.broadcast_to(grid.xi[None, :], grid.shape)


def _diffusivities(params: PhysParams) -> np.ndarray:
    return np.array([params.eta, params.nu, params.mu])


def rhs(state: SystemState, nonlinear: bool = True) -> Tuple[SpectralField, SpectralField, SpectralField]:
    """
    Time derivative of the moving-frame coefficients.

    Couette transport is absorbed by the frame; dissipation, the d_x couplings
    and 2 d_x b1 act as exact spectral multipliers.

    Args:
        state: Current state; its fields carry shear_time == state.t
        nonlinear: Include the quadratic terms

    Returns:
        Tuple of (dw, dj, dtheta)
    """
    grid = state.grid
    s = state.shear_time
    data = state.stack()
    lap = grid.kk**2 + grid.xi_phys(s) ** 2
    out = linear_forcing(grid.kk, _label_grid(grid))(s, data)
    out = out - _diffusivities(state.params).reshape(3, 1, 1) * lap * data
    if nonlinear:
        out = out + nonlinear_terms(state)[0]
    fields = {name: SpectralField(grid, out[i], s) for i, name in enumerate(FIELD_ORDER)}
    return fields["w"], fields["j"], fields["theta"]


def cfl_number(state: SystemState, dt: float) -> float:
    """
    Advective CFL number in the sheared sampling coordinates.

    In (X, y) = (x - s y, y) the transport speed is (u1 - s u2, u2); the
    magnetic field enters the same way through the Lorentz terms.
    """
    grid = state.grid
    s = state.shear_time
    speed = 0.0
    for c1, c2 in (state.velocity(), state.magnetic()):
        p1, p2 = c1.to_physical(), c2.to_physical()
        local = np.abs(p1 - s * p2) * grid.nx / grid.lx + np.abs(p2) * grid.ny / grid.ly
        speed = max(speed, float(np.max(local)))
    return dt * speed


@dataclass
class Trajectory:
    """Sampled states of a nonlinear run with the stats of every step."""

    grid: GridSpec
    params: PhysParams
    states: List[SystemState] = field(default_factory=list)
    stats: List[StepStats] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def stack(self) -> np.ndarray:
        return np.stack([s.stack() for s in self.states])

    def save(self, path: str, schema_version: Optional[str] = None, extra: Optional[Dict[str, Any]] = None) -> str:
        return save_trajectory(path, self.grid, self.params, self.times, self.stack(), schema_version, extra)


class NonlinearSolver:
    """
    Time stepper for the full system.

    Features:
    - Lawson RK4 with exact dissipation in the moving frame
    - Instability guard with a state dump
    - Periodic checkpoints and trajectory events
    """

    def __init__(
        self,
        settings: Optional[Settings] = None,
        nonlinear: bool = True,
        output_dir: Optional[str] = None,
        registry: Optional[ExperimentRegistry] = None,
    ):
        """
        Initialize the solver.

        Args:
            settings: Lab settings; cached settings when omitted
            nonlinear: Include the quadratic terms
            output_dir: Directory for dumps and checkpoints
            registry: Registry receiving run events
        """
        self.settings = settings or get_settings()
        self.nonlinear = nonlinear
        self.output_dir = output_dir or self.settings.OUTPUT_DIR
        self.registry = registry
        self._wrap_warned = False

    def _forcing(self, grid: GridSpec, params: PhysParams, removed: List[float]):
        couplings = linear_forcing(grid.kk, _label_grid(grid))
        if not self.nonlinear:
            return couplings

        def forcing(t: float, data: np.ndarray) -> np.ndarray:
            if not np.all(np.isfinite(data)):
                raise FloatingPointError("non-finite stage values")
            terms, lost = nonlinear_terms(SystemState.from_stack(grid, data, t, params, t))
            removed.append(lost)
            return couplings(t, data) + terms

        return forcing

    def _diverge(self, state: SystemState, step_index: int, message: str) -> NoReturn:
        path = os.path.join(self.output_dir, "dumps", f"diverged_step{step_index:06d}.npz")
        dump = save_checkpoint(state, path, self.settings.SCHEMA_VERSION)
        logger.error(f"Instability at step {step_index}, t={state.t:.6g}: {message}; state dumped to {dump}")
        raise NumericalInstabilityError(f"{message} at t={state.t:.6g}", dump_path=dump)

    def step(self, state: SystemState, dt: float, step_index: int = 0) -> Tuple[SystemState, StepStats]:
        """
        Advance one step.

        Args:
            state: State in the moving frame
            dt: Step size
            step_index: Index recorded in the stats and dump names

        Returns:
            Tuple of (new state, step stats)

        Raises:
            ValueError: On a non-positive step or a frame mismatch
            NumericalInstabilityError: If the max amplitude grows by more than
                INSTABILITY_GROWTH_FACTOR or turns non-finite
        """
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        if state.shear_time != state.t:
            raise ValueError(f"State fields carry shear_time={state.shear_time} but the state is at t={state.t}")
        grid, params = state.grid, state.params
        removed: List[float] = []
        before = state.max_amplitude()
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                data = lawson_rk4_step(
                    state.stack(), state.t, dt, _diffusivities(params), grid.kk, _label_grid(grid),
                    self._forcing(grid, params, removed),
                )
            except FloatingPointError as e:
                self._diverge(state, step_index, str(e))
        after = float(np.max(np.abs(data))) if np.all(np.isfinite(data)) else math.inf
        if not math.isfinite(after) or (before > 0.0 and after > self.settings.INSTABILITY_GROWTH_FACTOR * before):
            self._diverge(state, step_index, f"max amplitude grew from {before:.3e} to {after:.3e}")

        t_new = state.t + dt
        new_state = SystemState.from_stack(grid, data, t_new, params, t_new)
        wrap = max(wrap_energy_fraction(f) for f in new_state.fields().values())
        if wrap > self.settings.WRAP_WARNING_FRACTION and not self._wrap_warned:
            logger.warning(f"Energy share {wrap:.3e} near the y-boundary at t={t_new:.6g}")
            self._wrap_warned = True
        stats = StepStats(
            step=step_index,
            t=t_new,
            dt=dt,
            cfl=cfl_number(state, dt),
            dealias_energy_removed=max(removed, default=0.0),
            max_amplitude=after,
            wrap_energy_fraction=wrap,
        )
        logger.debug(f"Step {step_index}: t={t_new:.6g} cfl={stats.cfl:.3e} max={after:.3e}")
        return new_state, stats

    async def _publish(self, event_name: str, data: Dict[str, Any]) -> None:
        if self.registry is not None:
            await self.registry.publish(event_name, data)

    async def run(self, init: SystemState, t_max: float, dt: float, sample_every: int = 1) -> Trajectory:
        """
        Integrate from init to init.t + t_max.

        Every ``sample_every`` steps the state is kept in the trajectory and
        published as a ``trajectory_sample`` event. Checkpoints follow the
        CHECKPOINT_EVERY / ENABLE_CHECKPOINTS settings.

        Args:
            init: Initial state in the moving frame
            t_max: Length of the run
            dt: Target step; shortened so the run ends exactly at t_max
            sample_every: Steps between trajectory samples

        Returns:
            Trajectory of the sampled states

        Raises:
            NumericalInstabilityError: Propagated from step after a run_diverged event
        """
        if t_max <= 0.0 or dt <= 0.0:
            raise ValueError(f"t_max and dt must be positive, got {t_max} and {dt}")
        if sample_every < 1:
            raise ValueError(f"sample_every must be >= 1, got {sample_every}")
        nsteps = max(int(math.ceil(t_max / dt - 1e-9)), 1)
        h = t_max / nsteps
        trajectory = Trajectory(grid=init.grid, params=init.params, states=[init])
        await self._publish("trajectory_sample", {"index": 0, "state": init})
        logger.info(f"Nonlinear run on {init.grid.shape}: {nsteps} steps of {h:.4g} to t={init.t + t_max:.4g}")

        state = init
        every = self.settings.CHECKPOINT_EVERY
        for n in range(1, nsteps + 1):
            try:
                state, stats = self.step(state, h, n)
            except NumericalInstabilityError as e:
                await self._publish("run_diverged", {"step": n, "t": state.t, "dump_path": e.dump_path, "message": str(e)})
                raise
            trajectory.stats.append(stats)
            if n % sample_every == 0 or n == nsteps:
                trajectory.states.append(state)
                await self._publish("trajectory_sample", {"index": len(trajectory.states) - 1, "state": state})
            if self.settings.ENABLE_CHECKPOINTS and n % every == 0:
                path = save_checkpoint(
                    state, os.path.join(self.output_dir, "checkpoints", f"step{n:06d}.npz"), self.settings.SCHEMA_VERSION
                )
                await self._publish("checkpoint_written", {"step": n, "t": state.t, "path": path})
            await asyncio.sleep(0)

        await self._publish("run_complete", {"steps": nsteps, "t": state.t, "samples": len(trajectory.states)})
        logger.info(f"Nonlinear run complete at t={state.t:.6g} with {len(trajectory.states)} samples")
        return trajectory
