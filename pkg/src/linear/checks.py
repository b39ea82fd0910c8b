"""
Decay and energy checks on linear runs.

Every bound is asserted at each sampled time. Rates are fitted by log-linear
least squares on the tail window [t_max/2, t_max]; samples that have decayed
below 1e-200 of the initial size are left out of the fit, and a window with no
usable samples counts as infinitely fast decay.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid

from src.linear.characteristics import LinearSeries
from src.multipliers.symbols import SymbolKind, build_symbol, max_linear_multiplier
from src.spectral.operators import dx_power, gradient_weighted_norm, weighted_norm

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9
UNDERFLOW_FRACTION = 1e-200


class DecayFit(BaseModel):
    """Fitted exponential decay of one per-k norm"""

    k: int
    kind: str
    order: int = 0
    rate: float
    prefactor: float
    rate_floor: float
    max_bound_ratio: Optional[float] = Field(default=None, description="Largest norm / explicit bound over samples")
    bracket_ratio: Optional[float] = Field(default=None, description="Measured prefactor over the bracket structure")
    passed: bool
    note: Optional[str] = None


def fit_decay(times: np.ndarray, norms: np.ndarray) -> Tuple[float, float]:
    """
    Log-linear least-squares fit of norms ~ A e^{-r t} over the tail window.

    Returns:
        Tuple of (rate r, prefactor A)
    """
    t_max = float(times[-1])
    t_start = float(times[0])
    window = times >= t_start + 0.5 * (t_max - t_start)
    reference = max(float(np.max(norms)), 0.0)
    valid = window & (norms > UNDERFLOW_FRACTION * reference)
    if reference == 0.0 or np.count_nonzero(valid) < 2:
        return math.inf, 0.0
    slope, intercept = np.polyfit(times[valid], np.log(norms[valid]), 1)
    return float(-slope), float(math.exp(intercept))


def theta_rate_floor(eta: float, k: int) -> float:
    """(1/16) eta^{1/3} |k|^{2/3}"""
    return eta ** (1.0 / 3.0) * abs(k) ** (2.0 / 3.0) / 16.0


def wj_rate_floor(nu: float, k: int) -> float:
    """nu^{1/3} |k|^{2/3} / (8 (1 + max M'_k)), the Gronwall rate of the (w, j) estimate."""
    if k == 0:
        return 0.0
    return nu ** (1.0 / 3.0) * abs(k) ** (2.0 / 3.0) / (8.0 * (1.0 + max_linear_multiplier(nu, k)))


def check_theta_decay(series: LinearSeries, k: int) -> DecayFit:
    """
    Check ||theta_k(t)|| <= sqrt(2) ||theta_k(0)|| e^{-(1/16) eta^{1/3} |k|^{2/3} t} at every sample.

    For k = 0 the check is that ||theta_0|| never increases.

    Args:
        series: Linear run started from theta-only data
        k: x-wavenumber

    Returns:
        DecayFit of kind "theta"
    """
    norms = series.mode_norms("theta")[:, series.grid.k_index(k)]
    elapsed = series.times - series.times[0]
    rate, prefactor = fit_decay(series.times, norms)
    norm0 = float(norms[0])
    if k == 0:
        increasing = np.any(norms[1:] > norms[:-1] * (1.0 + BOUND_SLACK))
        return DecayFit(
            k=0, kind="theta", rate=rate, prefactor=prefactor, rate_floor=0.0,
            passed=not increasing, note="x-average: monotone heat decay",
        )
    floor = theta_rate_floor(series.params.eta, k)
    bound = math.sqrt(2.0) * norm0 * np.exp(-floor * elapsed)
    ratio = _max_ratio(norms, bound)
    passed = ratio <= 1.0 + BOUND_SLACK and rate >= floor
    if not passed:
        logger.warning(f"theta decay check failed at k={k}: bound ratio {ratio:.6g}, rate {rate:.6g}, floor {floor:.6g}")
    return DecayFit(
        k=k, kind="theta", rate=rate, prefactor=prefactor, rate_floor=floor,
        max_bound_ratio=ratio, passed=passed,
    )


def check_wj_decay(series: LinearSeries, k: int, theta0_norm: Optional[float] = None) -> DecayFit:
    """
    Check the tail decay rate of ||(w_k, j_k)|| against the Gronwall floor.

    The measured prefactor sup_t ||(w_k, j_k)(t)|| e^{r_floor t} is reported against the
    bracket nu^{-2} ||(w_k, j_k)(0)|| + nu^{-6} (nu^{-1} |k|)^{1/3} ||theta_k(0)||.

    Args:
        series: Linear run with nu = mu <= eta
        k: x-wavenumber
        theta0_norm: ||theta_k(0)||; read from the series when omitted

    Returns:
        DecayFit of kind "wj"
    """
    series.params.check_linear_regime()
    idx = series.grid.k_index(k)
    norms = series.wj_norms()[:, idx]
    if theta0_norm is None:
        theta0_norm = float(series.mode_norms("theta")[0, idx])
    nu = series.params.nu
    rate, prefactor = fit_decay(series.times, norms)
    floor = wj_rate_floor(nu, k)
    bracket = nu**-2 * float(norms[0]) + nu**-6 * (abs(k) / nu) ** (1.0 / 3.0) * theta0_norm
    elapsed = series.times - series.times[0]
    measured = float(np.max(norms * np.exp(floor * elapsed)))
    bracket_ratio = measured / bracket if bracket > 0.0 else 0.0
    if k == 0:
        passed = True
        note = "x-average: no enhanced dissipation floor"
    else:
        passed = rate >= floor
        note = None
    if not passed:
        logger.warning(f"(w, j) decay check failed at k={k}: rate {rate:.6g} below floor {floor:.6g}")
    return DecayFit(
        k=k, kind="wj", rate=rate, prefactor=prefactor, rate_floor=floor,
        bracket_ratio=bracket_ratio, passed=passed, note=note,
    )


def derivative_rate_floor(series: LinearSeries, k: int, order: int, kind: str) -> float:
    if kind == "theta":
        alpha = {1: 1.0 / 32.0, 2: 1.0 / 64.0}[order]
        return alpha * series.params.eta ** (1.0 / 3.0) * abs(k) ** (2.0 / 3.0)
    return wj_rate_floor(series.params.nu, k) / 2**order


def check_derivative_norms(series: LinearSeries, k: int, order: int, kind: str = "theta") -> DecayFit:
    """
    Check the decay rate of ||D_y^order f_k|| for theta or (w, j).

    order 0 for theta is the plain theta check.

    Args:
        series: Linear run
        k: Nonzero x-wavenumber
        order: 0, 1 or 2
        kind: "theta" or "wj"

    Returns:
        DecayFit with the measured prefactor over its bracket
    """
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
    if kind not in ("theta", "wj"):
        raise ValueError(f"unknown norm kind: {kind}")
    if order == 0:
        return check_theta_decay(series, k) if kind == "theta" else check_wj_decay(series, k)
    idx = series.grid.k_index(k)
    params = series.params
    if kind == "theta":
        norms = series.mode_norms("theta", order)[:, idx]
        base0 = float(series.mode_norms("theta")[0, idx])
        bracket = float(norms[0]) + (abs(k) / params.eta) ** (order / 3.0) * base0
    else:
        norms = series.wj_norms(order)[:, idx]
        base0 = float(series.wj_norms()[0, idx]) + float(series.mode_norms("theta")[0, idx])
        bracket = params.nu**-2 * float(norms[0]) + params.nu ** (-6 * order) * (abs(k) / params.nu) ** (order / 3.0) * base0
    rate, prefactor = fit_decay(series.times, norms)
    floor = derivative_rate_floor(series, k, order, kind)
    elapsed = series.times - series.times[0]
    measured = float(np.max(norms * np.exp(floor * elapsed)))
    passed = rate >= floor
    if not passed:
        logger.warning(f"D_y^{order} {kind} decay check failed at k={k}: rate {rate:.6g} below {floor:.6g}")
    return DecayFit(
        k=k, kind=kind, order=order, rate=rate, prefactor=prefactor, rate_floor=floor,
        bracket_ratio=measured / bracket if bracket > 0.0 else 0.0, passed=passed,
    )


def theta_multiplier_energy(series: LinearSeries, k: int) -> np.ndarray:
    """E(t) = <(1 + M_k) theta_k, theta_k> at every sample."""
    symbol = build_symbol(SymbolKind.THETA, series.params)
    idx = series.grid.k_index(k)
    out = np.empty(series.times.size)
    for n, t in enumerate(series.times):
        xi = series.grid.xi_phys(float(t))[idx]
        weight = 1.0 + symbol.value(k, xi)
        out[n] = series.grid.cell * float(np.sum(weight * np.abs(series.data[n, 0, idx]) ** 2))
    return out


def check_theta_multiplier_energy(series: LinearSeries, k: int) -> DecayFit:
    """
    Check E(t_{n+1}) <= E(t_n) e^{-(1/8) eta^{1/3} |k|^{2/3} (t_{n+1} - t_n)} between samples.

    Returns:
        DecayFit of kind "theta_multiplier_energy"; max_bound_ratio is the worst
        one-interval ratio against the Gronwall factor
    """
    energy = theta_multiplier_energy(series, k)
    floor = 2.0 * theta_rate_floor(series.params.eta, k)
    factors = np.exp(-floor * np.diff(series.times))
    allowed = energy[:-1] * factors
    ratio = _max_ratio(energy[1:], allowed)
    rate, prefactor = fit_decay(series.times, energy)
    passed = ratio <= 1.0 + BOUND_SLACK
    return DecayFit(
        k=k, kind="theta_multiplier_energy", rate=rate, prefactor=prefactor,
        rate_floor=floor, max_bound_ratio=ratio, passed=passed,
    )


def theta_energy_residual(series: LinearSeries, k: Optional[int] = None) -> float:
    """
    Largest relative residual of d/dt ||theta_k||^2 = -2 eta ||grad theta_k||^2.

    The identity is integrated over consecutive sample pairs [t_{n-1}, t_{n+1}]
    with Simpson's rule, so the residual is fourth order in the sample spacing.

    Args:
        series: Linear run with uniform sample spacing
        k: Restrict to one wavenumber; all wavenumbers when omitted

    Returns:
        Max over pairs and k of |dE + 2 int D| / max(|dE|, 2 int D)
    """
    grid = series.grid
    rows = range(grid.nx) if k is None else [grid.k_index(k)]
    h = float(series.times[1] - series.times[0])
    worst = 0.0
    energy = series.mode_norms("theta") ** 2
    dissipation = np.empty_like(energy)
    for n, t in enumerate(series.times):
        lap = grid.kk**2 + grid.xi_phys(float(t)) ** 2
        dissipation[n] = series.params.eta * grid.cell * np.sum(lap * np.abs(series.data[n, 0]) ** 2, axis=1)
    for row in rows:
        for n in range(1, series.times.size - 1, 2):
            change = energy[n + 1, row] - energy[n - 1, row]
            integral = h / 3.0 * (dissipation[n - 1, row] + 4.0 * dissipation[n, row] + dissipation[n + 1, row])
            scale = max(abs(change), 2.0 * integral)
            if scale <= 0.0:
                continue
            worst = max(worst, abs(change + 2.0 * integral) / scale)
    return worst


class SpacetimeReport(BaseModel):
    """Left-hand-side terms of the weighted space-time estimate and the measured constant"""

    b: float
    terms: Dict[str, float]
    lhs: float
    bracket: float
    measured_constant: float


def spacetime_norms(series: LinearSeries, b: float) -> SpacetimeReport:
    """
    Accumulate the weighted space-time norms of a linear run.

    Sup-in-time terms are maxima over samples; L2-in-time terms use the
    trapezoid rule over the sample times.

    Args:
        series: Linear run with all three fields
        b: Weight exponent

    Returns:
        SpacetimeReport with LHS / bracket as the measured constant
    """
    params = series.params
    nu, eta = params.nu, params.eta
    times = series.times
    n = times.size
    sup_wj = np.empty(n)
    grad_wj = np.empty(n)
    dx_wj = np.empty(n)
    sup_th = np.empty(n)
    grad_th = np.empty(n)
    dx_th = np.empty(n)
    for i, t in enumerate(times):
        t = float(t)
        w, j, theta = series.get_field(i, "w"), series.get_field(i, "j"), series.get_field(i, "theta")
        sup_wj[i] = math.hypot(weighted_norm(w, t, b), weighted_norm(j, t, b))
        grad_wj[i] = gradient_weighted_norm(w, t, b) ** 2 + gradient_weighted_norm(j, t, b) ** 2
        dx_wj[i] = weighted_norm(w, t, b, 1.0 / 3.0) ** 2 + weighted_norm(j, t, b, 1.0 / 3.0) ** 2
        sup_th[i] = weighted_norm(theta, t, b, 1.0 / 3.0)
        grad_th[i] = gradient_weighted_norm(theta, t, b, 1.0 / 3.0) ** 2
        dx_th[i] = weighted_norm(theta, t, b, 2.0 / 3.0) ** 2

    theta_weight = nu**-4 * (nu * eta) ** (-1.0 / 6.0)
    terms = {
        "wj_sup": float(np.max(sup_wj)),
        "wj_gradient": nu**0.5 * math.sqrt(trapezoid(grad_wj, times)),
        "wj_dx13": nu ** (1.0 / 6.0) * math.sqrt(trapezoid(dx_wj, times)),
        "theta_dx13_sup": theta_weight * float(np.max(sup_th)),
        "theta_dx13_gradient": theta_weight * eta**0.5 * math.sqrt(trapezoid(grad_th, times)),
        "theta_dx23": theta_weight * eta ** (1.0 / 6.0) * math.sqrt(trapezoid(dx_th, times)),
    }
    t0 = float(times[0])
    w0, j0, th0 = series.get_field(0, "w"), series.get_field(0, "j"), series.get_field(0, "theta")
    # at the initial sample Lambda_t^b is the H^b weight of the initial data
    bracket = nu**-2 * math.hypot(weighted_norm(w0, t0, b), weighted_norm(j0, t0, b)) + theta_weight * weighted_norm(
        dx_power(th0, 1.0 / 3.0), t0, b
    )
    lhs = float(sum(terms.values()))
    return SpacetimeReport(
        b=b, terms=terms, lhs=lhs, bracket=bracket, measured_constant=lhs / bracket if bracket > 0.0 else 0.0
    )


def _max_ratio(values: np.ndarray, bound: np.ndarray) -> float:
    ratio = np.zeros_like(values, dtype=float)
    positive = bound > 0.0
    np.divide(values, bound, out=ratio, where=positive)
    ratio[~positive & (values > 0.0)] = math.inf
    return float(np.max(ratio)) if ratio.size else 0.0


def run_linear_checks(series: LinearSeries, kset: List[int], b: float) -> Dict[str, object]:
    """Evaluate every decay and energy check for the listed wavenumbers."""
    fits: List[DecayFit] = []
    for k in kset:
        fits.append(check_theta_decay(series, k))
        fits.append(check_wj_decay(series, k))
        if k != 0:
            fits.append(check_theta_multiplier_energy(series, k))
            for order in (1, 2):
                fits.append(check_derivative_norms(series, k, order, "theta"))
                fits.append(check_derivative_norms(series, k, order, "wj"))
    residual = theta_energy_residual(series) if series.times.size >= 3 else 0.0
    spacetime = spacetime_norms(series, b)
    return {"fits": fits, "theta_energy_residual": residual, "spacetime": spacetime}
