"""
Linearized Boussinesq-MHD system along shear characteristics.

In the moving frame every coefficient label (k, eta) is a characteristic whose
physical frequency is xi(t) = eta - k t. The per-mode system is a 3x3 linear ODE
in (theta, w, j); dissipation is integrated exactly and the bounded couplings
with a fourth-order Lawson scheme. Characteristics never exchange energy, so no
resampling of the frequency grid is needed during integration.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.nonlinear.state import FIELD_ORDER, SystemState
from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams
from src.spectral.timestepping import lawson_rk4_step, linear_forcing
from src.utils.errors import StepRejectedError
from src.utils.step_control import StepControl

logger = logging.getLogger(__name__)


@dataclass
class ModeCharacteristic:
    """One (k, xi_init) characteristic with its (theta, w, j) amplitudes."""

    k: int
    xi_init: float
    state: np.ndarray
    t: float = 0.0

    @property
    def xi(self) -> float:
        return self.xi_init - self.k * self.t


def mode_rhs(nu: float, mu: float, eta: float, k: int, xi: float, state: np.ndarray) -> np.ndarray:
    """
    Time derivative of (theta, w, j) for one mode at instantaneous frequency xi.

    Args:
        nu: Viscosity
        mu: Magnetic diffusivity
        eta: Thermal diffusivity
        k: x-wavenumber
        xi: Physical y-frequency
        state: Complex 3-vector (theta, w, j)

    Returns:
        Complex 3-vector of derivatives

    Raises:
        ValueError: For the gauge mode (k, xi) = (0, 0)
    """
    if k == 0 and xi == 0.0:
        raise ValueError("mode (k, xi) = (0, 0) is a gauge mode and is held constant")
    theta, w, j = np.asarray(state, dtype=complex)
    lap = k**2 + xi**2
    return np.array(
        [
            -eta * lap * theta,
            -nu * lap * w + 1j * k * j + 1j * k * theta,
            -mu * lap * j + 1j * k * w - (2.0 * k * xi / lap) * j,
        ]
    )


def integrate_mode(
    mode: ModeCharacteristic, params: PhysParams, t_end: float, dt: float
) -> ModeCharacteristic:
    """Advance a single characteristic to t_end with the Lawson scheme."""
    nsteps = max(int(math.ceil((t_end - mode.t) / dt)), 1)
    h = (t_end - mode.t) / nsteps
    kk = np.array([float(mode.k)])
    eta_label = np.array([mode.xi_init])
    state = np.asarray(mode.state, dtype=complex).reshape(3, 1)
    kappa = np.array([params.eta, params.nu, params.mu])
    forcing = linear_forcing(kk, eta_label)
    t = mode.t
    for _ in range(nsteps):
        state = lawson_rk4_step(state, t, h, kappa, kk, eta_label, forcing)
        t += h
    return ModeCharacteristic(k=mode.k, xi_init=mode.xi_init, state=state[:, 0], t=t_end)


def default_dt(params: PhysParams, grid: GridSpec, safety: float = 0.5) -> float:
    """min(0.01, 0.1 / (nu * xi_max^2)) scaled by a safety factor."""
    xi_max = float(np.max(np.abs(grid.xi)))
    diffusivity = max(params.nu, params.mu, params.eta)
    if diffusivity <= 0.0:
        return 0.01 * safety
    return min(0.01, 0.1 / (diffusivity * xi_max**2)) * safety


@dataclass
class LinearSeries:
    """Moving-frame samples of a linear run; sample n carries shear_time == times[n]."""

    grid: GridSpec
    params: PhysParams
    times: np.ndarray
    data: np.ndarray
    substeps: List[int] = field(default_factory=list)

    def state(self, n: int) -> SystemState:
        return SystemState.from_stack(self.grid, self.data[n], float(self.times[n]), self.params, float(self.times[n]))

    def get_field(self, n: int, name: str) -> SpectralField:
        return SpectralField(self.grid, self.data[n, FIELD_ORDER.index(name)], float(self.times[n]))

    def mode_norms(self, name: str, power: int = 0) -> np.ndarray:
        """
        Per-k norms || D_y^power f_k || of one field at every sample.

        Returns:
            Array of shape (n_samples, nx)
        """
        idx = FIELD_ORDER.index(name)
        out = np.empty((self.times.size, self.grid.nx))
        for n, t in enumerate(self.times):
            weight = np.abs(self.grid.xi_phys(float(t))) ** (2 * power) if power else 1.0
            out[n] = np.sqrt(self.grid.cell * np.sum(weight * np.abs(self.data[n, idx]) ** 2, axis=1))
        return out

    def wj_norms(self, power: int = 0) -> np.ndarray:
        """Per-k norms of the pair (w_k, j_k)."""
        return np.sqrt(self.mode_norms("w", power) ** 2 + self.mode_norms("j", power) ** 2)

    def to_columns(self) -> Dict[str, np.ndarray]:
        """Column view used by the CSV writer: t and per-k norms."""
        cols: Dict[str, np.ndarray] = {"t": self.times}
        theta = self.mode_norms("theta")
        wj = self.wj_norms()
        for k in sorted(set(int(v) for v in self.grid.k if abs(v) < self.grid.nx // 2)):
            idx = self.grid.k_index(k)
            cols[f"theta_k{k}"] = theta[:, idx]
            cols[f"wj_k{k}"] = wj[:, idx]
        return cols


def _advance(
    data: np.ndarray, t0: float, t1: float, nsub: int, kappa: np.ndarray,
    kk: np.ndarray, eta_label: np.ndarray, forcing,
) -> np.ndarray:
    h = (t1 - t0) / nsub
    t = t0
    for _ in range(nsub):
        data = lawson_rk4_step(data, t, h, kappa, kk, eta_label, forcing)
        t += h
    return data


def integrate_spectrum(
    init: SystemState,
    t_max: float,
    dt: Optional[float] = None,
    sample_dt: Optional[float] = None,
    control: Optional[StepControl] = None,
) -> LinearSeries:
    """
    Integrate every characteristic of the linear system from init.t to init.t + t_max.

    Each output interval is covered by n substeps and checked against 2n substeps
    (step doubling). The interval is refined until the two agree to
    control.tolerance relative to the state amplitude.

    Args:
        init: Initial state; its fields must carry shear_time == init.t
        t_max: Length of the run
        dt: Target substep; defaults to default_dt
        sample_dt: Output spacing; defaults to dt
        control: Substep refinement policy

    Returns:
        LinearSeries of moving-frame samples

    Raises:
        ValueError: On a frame mismatch or non-positive times
        StepRejectedError: When refinement cannot meet the tolerance
    """
    control = control or StepControl()
    if init.shear_time != init.t:
        raise ValueError(f"Initial fields carry shear_time={init.shear_time} but the state is at t={init.t}")
    if t_max <= 0.0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    grid, params = init.grid, init.params
    dt = dt or default_dt(params, grid)
    sample_dt = sample_dt or dt
    nsamples = max(int(round(t_max / sample_dt)), 1)
    times = init.t + np.linspace(0.0, t_max, nsamples + 1)

    kk = grid.kk
    eta_label = np.broadcast_to(grid.xi[None, :], grid.shape)
    kappa = np.array([params.eta, params.nu, params.mu])
    forcing = linear_forcing(kk, eta_label)
    base = max(int(math.ceil((times[1] - times[0]) / dt)), 1)

    data = np.empty((times.size, 3) + grid.shape, dtype=complex)
    data[0] = init.stack()
    used: List[int] = []
    logger.info(f"Integrating linear spectrum on {grid.shape} to t={times[-1]:.4g} with {nsamples} samples")
    for n in range(nsamples):
        current = data[n]
        scale = max(float(np.max(np.abs(current))), 1e-300)
        for attempt in range(control.max_refinements + 1):
            nsub = base * control.get_substeps(attempt)
            coarse = _advance(current, times[n], times[n + 1], nsub, kappa, kk, eta_label, forcing)
            fine = _advance(current, times[n], times[n + 1], 2 * nsub, kappa, kk, eta_label, forcing)
            error = float(np.max(np.abs(fine - coarse))) / scale
            if error <= control.tolerance:
                data[n + 1] = fine
                used.append(2 * nsub)
                break
            logger.debug(f"Interval {n}: rejected {nsub} substeps with error {error:.3e}")
        else:
            logger.error(f"Step refinement exhausted on interval {n} at t={times[n]:.4g}")
            raise StepRejectedError(
                f"local error {error:.3e} above tolerance {control.tolerance:.1e} after "
                f"{control.max_refinements} refinements at t={times[n]:.6g}"
            )
    return LinearSeries(grid=grid, params=params, times=times, data=data, substeps=used)
