"""
Multiplier-weighted energies, the quadratic pairing terms and their exact identities.

Every quantity is evaluated at the physical frequencies of the field's frame,
so moving-frame solver states and lab-frame snapshots are handled alike. The
weight of a pairing is M(k, xi) Lambda_t^{2b}(k, xi); products are formed the
same way the solver forms them, so the identities close to round-off on the
solver's own samples.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from src.multipliers.symbols import MultiplierSymbol, SymbolKind, build_symbol
from src.nonlinear.solver import compute_Q, transport
from src.nonlinear.state import SystemState
from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.operators import (
    biot_savart,
    dealiased_product,
    divergence,
    dx,
    dy,
    gradient_weighted_norm,
    inner,
    inverse_laplacian_sqrt,
    lambda_symbol,
    laplacian_symbol,
    project_nonzero,
    project_zero,
    weighted_norm,
)
from src.spectral.params import PhysParams
from src.spectral.timestepping import linear_forcing

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-10
BOUND_CHAIN_SLACK = 1e-12
I_TERM_NAMES = tuple(f"I{n}" for n in range(1, 11))
BALANCE_KINDS = ("theta", "w", "j", "theta_dx")
THIRD = 1.0 / 3.0


def full_symbol(params: PhysParams, symbol: Optional[MultiplierSymbol] = None) -> MultiplierSymbol:
    return symbol or build_symbol(SymbolKind.FULL, params)


def _symbol_arrays(f: SpectralField, symbol: MultiplierSymbol):
    return symbol.value_and_dxi(f.grid.kk, f.xi_phys)


def _weight(f: SpectralField, t: float, b: float, symbol: MultiplierSymbol, xpow: float = 0.0) -> np.ndarray:
    weight = symbol.value(f.grid.kk, f.xi_phys) * lambda_symbol(t, 2.0 * b, f.grid.kk, f.xi_phys)
    if xpow > 0:
        weight = weight * np.abs(f.grid.kk) ** (2.0 * xpow)
    return weight


def m_weighted_energy(
    f: SpectralField, t: float, b: float, xpow: float = 0.0, *, symbol: MultiplierSymbol
) -> float:
    """
    Evaluate || sqrt(M) |D_x|^xpow Lambda_t^b f ||^2 by Plancherel.

    Args:
        f: Field
        t: Time at which Lambda_t is evaluated
        b: Weight exponent
        xpow: Power of |D_x|, must be >= 0
        symbol: The full multiplier M

    Returns:
        The weighted energy
    """
    if xpow < 0:
        raise ValueError(f"xpow must be >= 0, got {xpow}")
    return float(f.grid.cell * np.sum(_weight(f, t, b, symbol, xpow) * np.abs(f.coef) ** 2))


def _pairing(a: SpectralField, f: SpectralField, weight: np.ndarray) -> float:
    """Re < Lambda a, M Lambda f > with the weight M Lambda^2 precomputed."""
    return float(np.real(a.grid.cell * np.sum(weight * a.coef * np.conj(f.coef))))


def compute_I_terms(
    state: SystemState, t: float, b: float, symbol: Optional[MultiplierSymbol] = None
) -> Dict[str, float]:
    """
    Real parts of the ten pairings entering the weighted energy identities.

    I1 = <L(u.grad theta), M L theta>     I6 = <L(u.grad j), M L j>
    I2 = <L(u.grad w), M L w>             I7 = <L(b.grad w), M L j>
    I3 = <L(b.grad j), M L w>             I8 = <d_x L w, M L j>
    I4 = <d_x L theta, M L w>             I9 = <L Q, M L j>
    I5 = <d_x L j, M L w>                 I10 = <L(u.grad theta), |D_x|^{2/3} M L theta>

    with L = Lambda_t^b.

    Args:
        state: State in any frame
        t: Time at which Lambda_t is evaluated
        b: Weight exponent
        symbol: Full multiplier; built from state.params when omitted

    Returns:
        Mapping "I1".."I10" to real values
    """
    symbol = full_symbol(state.params, symbol)
    theta, w, j = state.theta, state.w, state.j
    u1, u2 = state.velocity()
    b1, b2 = state.magnetic()
    weight = _weight(theta, t, b, symbol)
    theta_transport = transport(u1, u2, theta)
    return {
        "I1": _pairing(theta_transport, theta, weight),
        "I2": _pairing(transport(u1, u2, w), w, weight),
        "I3": _pairing(transport(b1, b2, j), w, weight),
        "I4": _pairing(dx(theta), w, weight),
        "I5": _pairing(dx(j), w, weight),
        "I6": _pairing(transport(u1, u2, j), j, weight),
        "I7": _pairing(transport(b1, b2, w), j, weight),
        "I8": _pairing(dx(w), j, weight),
        "I9": _pairing(compute_Q(u1, u2, b1, b2), j, weight),
        "I10": _pairing(theta_transport, theta, _weight(theta, t, b, symbol, THIRD)),
    }


class IdentityCheck(BaseModel):
    """One exact identity evaluated on a state"""

    name: str
    value: float
    scale: float
    relative: float
    passed: bool


class IdentityReport(BaseModel):
    """Outcome of a group of identity or bound-chain checks"""

    t: float
    checks: Dict[str, IdentityCheck]
    passed: bool

    @property
    def failures(self) -> List[str]:
        return [name for name, check in self.checks.items() if not check.passed]


def _identity(name: str, value: complex, scale: float, tolerance: float = IDENTITY_TOLERANCE) -> IdentityCheck:
    size = abs(value)
    relative = size / scale if scale > 0.0 else (0.0 if size == 0.0 else math.inf)
    return IdentityCheck(name=name, value=float(size), scale=float(scale), relative=relative, passed=relative <= tolerance)


def _norm(f: SpectralField) -> float:
    return math.sqrt(max(inner(f, f).real, 0.0))


def _report(t: float, checks: List[IdentityCheck], label: str) -> IdentityReport:
    report = IdentityReport(t=t, checks={c.name: c for c in checks}, passed=all(c.passed for c in checks))
    if not report.passed:
        logger.warning(f"{label} broken at t={t:.6g}: {', '.join(report.failures)}")
    return report


def cancellation_checks(
    state: SystemState, t: float, b: float, symbol: Optional[MultiplierSymbol] = None
) -> IdentityReport:
    """
    Evaluate the exact orthogonality identities of the zero-mode interactions.

    With A = sqrt(M) Lambda_t^b, u0 and b0 the x-averaged velocity and
    magnetic field and subscripts 0 / != the zero and non-zero x-modes:

    theta_zero_mode: <A(u0 d_x theta_!=), A theta_0> = 0
    theta_transport: <u0 d_x (A theta_!=), A theta_!=> = 0
    b0_w_to_j0: <A(b0 d_x w_!=), A j_0> = 0
    b0_j_to_w0: <A(b0 d_x j_!=), A w_0> = 0
    b0_cross: <b0 d_x (A w_!=), A j_!=> + <b0 d_x (A j_!=), A w_!=> = 0
    coupling: I5 + I8 = 0
    div_u, div_b: the recovered fields are divergence free

    Each value is compared with the product of its factor norms.

    Returns:
        IdentityReport naming every broken identity
    """
    symbol = full_symbol(state.params, symbol)
    grid = state.grid
    root = np.sqrt(symbol.value(grid.kk, state.theta.xi_phys)) * lambda_symbol(t, b, grid.kk, state.theta.xi_phys)

    def a(f: SpectralField) -> SpectralField:
        return f.with_coef(root * f.coef)

    def product(c: SpectralField, f: SpectralField) -> SpectralField:
        return dealiased_product(c, dx(f))[0]

    u0 = project_zero(state.velocity()[0])
    b0 = project_zero(state.magnetic()[0])
    theta_0, theta_n = project_zero(state.theta), project_nonzero(state.theta)
    w_0, w_n = project_zero(state.w), project_nonzero(state.w)
    j_0, j_n = project_zero(state.j), project_nonzero(state.j)

    checks = []
    lhs = a(product(u0, theta_n))
    checks.append(_identity("theta_zero_mode", inner(lhs, a(theta_0)), _norm(lhs) * _norm(a(theta_0))))
    lhs = product(u0, a(theta_n))
    checks.append(_identity("theta_transport", inner(lhs, a(theta_n)), _norm(lhs) * _norm(a(theta_n))))
    lhs = a(product(b0, w_n))
    checks.append(_identity("b0_w_to_j0", inner(lhs, a(j_0)), _norm(lhs) * _norm(a(j_0))))
    lhs = a(product(b0, j_n))
    checks.append(_identity("b0_j_to_w0", inner(lhs, a(w_0)), _norm(lhs) * _norm(a(w_0))))
    first, second = product(b0, a(w_n)), product(b0, a(j_n))
    checks.append(
        _identity(
            "b0_cross",
            inner(first, a(j_n)) + inner(second, a(w_n)),
            _norm(first) * _norm(a(j_n)) + _norm(second) * _norm(a(w_n)),
        )
    )

    weight = root**2
    coupling = _pairing(dx(state.j), state.w, weight) + _pairing(dx(state.w), state.j, weight)
    scale = _norm(a(dx(state.j))) * _norm(a(state.w)) + _norm(a(dx(state.w))) * _norm(a(state.j))
    checks.append(_identity("coupling", coupling, scale))

    for name, pair in (("div_u", state.velocity()), ("div_b", state.magnetic())):
        div = divergence(*pair)
        gradient = math.sqrt(sum(float(np.sum(np.abs(dx(c).coef) ** 2 + np.abs(dy(c).coef) ** 2)) for c in pair))
        checks.append(_identity(name, float(np.sqrt(np.sum(np.abs(div) ** 2))), gradient))
    return _report(t, checks, "Cancellation identities")


def _vector_norm(pair, t: float, b: float) -> float:
    return math.hypot(weighted_norm(pair[0], t, b), weighted_norm(pair[1], t, b))


def bound_chain_checks(state: SystemState, t: float, b: float) -> IdentityReport:
    """
    Pointwise norm inequalities used to pass from the recovered fields to w and j.

    velocity_nonzero: ||L u_!=|| <= ||(-Delta)^{-1/2} L w_!=||
    magnetic_nonzero: ||L b_!=|| <= ||(-Delta)^{-1/2} L j_!=||
    dx_u1, dx_u2: ||L d_x u^i|| <= ||L w_!=||
    dx_b1, dx_b2: ||L d_x b^i|| <= ||L j_!=||

    A check's value is the excess of the left side over the right side;
    it passes when the excess is at most round-off of the right side.
    """
    checks = []
    for label, source, pair in (("u", state.w, state.velocity()), ("b", state.j, state.magnetic())):
        nonzero = project_nonzero(source)
        recovered = biot_savart(nonzero)
        bound = weighted_norm(inverse_laplacian_sqrt(nonzero), t, b)
        name = "velocity_nonzero" if label == "u" else "magnetic_nonzero"
        checks.append(_chain(name, _vector_norm(recovered, t, b), bound))
        plain = weighted_norm(nonzero, t, b)
        for index, component in enumerate(pair, start=1):
            checks.append(_chain(f"dx_{label}{index}", weighted_norm(dx(component), t, b), plain))
    return _report(t, checks, "Bound chain")


def _chain(name: str, lhs: float, rhs: float) -> IdentityCheck:
    excess = max(lhs - rhs, 0.0)
    scale = max(rhs, 1e-300)
    relative = excess / scale
    return IdentityCheck(
        name=name, value=excess, scale=rhs, relative=relative, passed=relative <= BOUND_CHAIN_SLACK
    )


def iterm_brackets(state: SystemState, t: float, b: float) -> Dict[str, float]:
    """
    Norm-product brackets bounding each |I_m| up to an unnamed constant.

    Keys follow the grouping of the estimates: I3 and I7 are bounded jointly,
    I5 and I8 cancel and have no bracket.

    Returns:
        Mapping of term name to bracket value
    """
    nu = state.params.nu
    theta, w, j = state.theta, state.w, state.j

    def lam(f: SpectralField, xpow: float = 0.0) -> float:
        return weighted_norm(f, t, b, xpow)

    def grad(f: SpectralField, xpow: float = 0.0) -> float:
        return gradient_weighted_norm(f, t, b, xpow)

    def low(f: SpectralField, xpow: float = 0.0) -> float:
        return weighted_norm(inverse_laplacian_sqrt(project_nonzero(f)), t, b, xpow)

    def zero(f: SpectralField) -> float:
        return lam(project_zero(f))

    def transport_bracket(f: SpectralField) -> float:
        return (
            nu**-4 * low(w) * grad(f) * lam(f)
            + nu ** (-5.0 / 3.0) * zero(w) * lam(f, THIRD) ** 2
            + nu**-5 * zero(w) * low(f) * grad(f)
        )

    mixed = math.sqrt(low(j) * grad(j) * low(w) * grad(w))
    return {
        "I1": transport_bracket(theta),
        "I2": transport_bracket(w),
        "I3+I7": (
            nu**-4 * low(j) * grad(j) * lam(w)
            + 2.0 * nu**-5 * zero(j) * mixed
            + 2.0 * nu ** (-5.0 / 3.0) * zero(j) * lam(j, THIRD) * lam(w, THIRD)
            + nu**-4 * low(j) * grad(w) * lam(j)
        ),
        "I4": nu**-4 * lam(theta, 2.0 * THIRD) * lam(w, THIRD),
        "I6": transport_bracket(j),
        "I9": nu**-4 * mixed * lam(j) + nu**-4 * zero(w) * low(j) * grad(j),
        "I10": (
            nu**-4 * low(w) * grad(theta, THIRD) * lam(theta, THIRD)
            + nu**-5 * zero(w) * low(theta, THIRD) * grad(theta, THIRD)
            + nu**-4 * lam(w, THIRD) * grad(theta) * lam(theta, THIRD)
            + nu ** (-5.0 / 3.0) * zero(w) * lam(theta, 2.0 * THIRD) ** 2
        ),
    }


def bracket_ratios(terms: Dict[str, float], brackets: Dict[str, float]) -> Dict[str, float]:
    """|I_m| / bracket per bracketed term; 0 where the bracket vanishes."""
    measured = dict(terms)
    measured["I3+I7"] = terms["I3"] + terms["I7"]
    ratios = {}
    for name, bracket in brackets.items():
        ratios[name] = abs(measured[name]) / bracket if bracket > 0.0 else 0.0
    return ratios


class BalanceTerms(BaseModel):
    """Right-hand side of one energy identity split by origin"""

    energy: float
    dissipation: float
    shear: float
    sources: Dict[str, float]

    @property
    def rate(self) -> float:
        return -self.dissipation - self.shear + sum(self.sources.values())

    @property
    def scale(self) -> float:
        return abs(self.dissipation) + abs(self.shear) + sum(abs(v) for v in self.sources.values())


def balance_terms(
    state: SystemState,
    which: str,
    b: float,
    nonlinear: bool = True,
    symbol: Optional[MultiplierSymbol] = None,
) -> BalanceTerms:
    """
    Evaluate the energy and the right-hand side of its exact identity at one sample.

    d/dt E + 2 kappa ||grad sqrt(M) L f||^2 + <(k d_xi M) L f, L f> = sources

    with E = ||sqrt(M) L f||^2 (|D_x|^{1/3} inserted for theta_dx) and
    sources theta: -2 I1; w: -2 I2 + 2 I3 + 2 I4 + 2 I5;
    j: -2 I6 + 2 I7 + 2 I8 + 2 I9 - 2 <(2 k xi / |xi|^2) L j, M L j>;
    theta_dx: -2 I10. Lambda is evaluated at the state's time.

    Args:
        state: Sample of a run
        which: One of theta, w, j, theta_dx
        b: Weight exponent
        nonlinear: Include the quadratic sources
        symbol: Full multiplier; built from state.params when omitted

    Returns:
        BalanceTerms at the sample

    Raises:
        ValueError: For an unknown identity
    """
    if which not in BALANCE_KINDS:
        raise ValueError(f"Unknown energy identity: {which}; expected one of {', '.join(BALANCE_KINDS)}")
    symbol = full_symbol(state.params, symbol)
    t = state.t
    name = "theta" if which == "theta_dx" else which
    f = state.fields()[name]
    xpow = THIRD if which == "theta_dx" else 0.0
    kappa = {"theta": state.params.eta, "w": state.params.nu, "j": state.params.mu}[name]
    grid = f.grid
    value, slope = _symbol_arrays(f, symbol)
    lam2 = lambda_symbol(t, 2.0 * b, grid.kk, f.xi_phys)
    xweight = np.abs(grid.kk) ** (2.0 * xpow) if xpow > 0 else 1.0
    power = np.abs(f.coef) ** 2 * xweight * lam2
    energy = float(grid.cell * np.sum(value * power))
    dissipation = 2.0 * kappa * float(grid.cell * np.sum(value * laplacian_symbol(f) * power))
    shear = float(grid.cell * np.sum(grid.kk * slope * power))

    sources: Dict[str, float] = {}
    if nonlinear:
        terms = compute_I_terms(state, t, b, symbol)
    else:
        terms = dict.fromkeys(I_TERM_NAMES, 0.0)
        terms.update(_linear_pairings(state, t, b, symbol))
    if which == "theta":
        sources["I1"] = -2.0 * terms["I1"]
    elif which == "theta_dx":
        sources["I10"] = -2.0 * terms["I10"]
    elif which == "w":
        sources.update({"I2": -2.0 * terms["I2"], "I3": 2.0 * terms["I3"], "I4": 2.0 * terms["I4"], "I5": 2.0 * terms["I5"]})
    else:
        sources.update({"I6": -2.0 * terms["I6"], "I7": 2.0 * terms["I7"], "I8": 2.0 * terms["I8"], "I9": 2.0 * terms["I9"]})
        sources["stretching"] = _stretching(state, t, b, symbol)
    return BalanceTerms(energy=energy, dissipation=dissipation, shear=shear, sources=sources)


def _linear_pairings(state: SystemState, t: float, b: float, symbol: MultiplierSymbol) -> Dict[str, float]:
    weight = _weight(state.theta, t, b, symbol)
    return {
        "I4": _pairing(dx(state.theta), state.w, weight),
        "I5": _pairing(dx(state.j), state.w, weight),
        "I8": _pairing(dx(state.w), state.j, weight),
    }


def _stretching(state: SystemState, t: float, b: float, symbol: MultiplierSymbol) -> float:
    """2 Re < L(2 d_x b1), M L j >, the closure term of the current equation."""
    grid = state.grid
    eta_label = np.broadcast_to(grid.xi[None, :], grid.shape)
    data = np.stack([np.zeros(grid.shape, dtype=complex), np.zeros(grid.shape, dtype=complex), state.j.coef])
    closure = linear_forcing(grid.kk, eta_label)(state.shear_time, data)[2]
    return 2.0 * _pairing(state.j.with_coef(closure), state.j, _weight(state.j, t, b, symbol))


def _derivative(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Fourth-order finite differences on uniform samples, one-sided at the ends."""
    n = values.size
    h = float(times[1] - times[0])
    out = np.empty(n)
    for i in range(n):
        if 2 <= i <= n - 3:
            out[i] = (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h)
        elif i < 2:
            f = values[:5]
            stencil = (-25.0, 48.0, -36.0, 16.0, -3.0) if i == 0 else (-3.0, -10.0, 18.0, -6.0, 1.0)
            out[i] = float(np.dot(stencil, f)) / (12.0 * h)
        else:
            f = values[-5:][::-1]
            stencil = (-25.0, 48.0, -36.0, 16.0, -3.0) if i == n - 1 else (-3.0, -10.0, 18.0, -6.0, 1.0)
            out[i] = -float(np.dot(stencil, f)) / (12.0 * h)
    return out


def states_from_samples(
    grid: GridSpec, params: PhysParams, times: np.ndarray, data: np.ndarray
) -> List[SystemState]:
    """Rebuild moving-frame states from stored samples (sample n has shear_time == times[n])."""
    return [SystemState.from_stack(grid, data[n], float(t), params, float(t)) for n, t in enumerate(times)]


def energy_balance_residual(
    states: Sequence[SystemState],
    which: str,
    b: float,
    nonlinear: bool = True,
    symbol: Optional[MultiplierSymbol] = None,
) -> float:
    """
    Largest relative residual of an exact energy identity over a sampled window.

    d/dt E is taken by fourth-order differences across the uniformly spaced
    samples; the residual at each sample is |dE/dt - rate| divided by the sum of
    the magnitudes of the terms in the identity.

    Args:
        states: At least five uniformly spaced samples of one run
        which: One of theta, w, j, theta_dx
        b: Weight exponent
        nonlinear: Whether the run included the quadratic terms
        symbol: Full multiplier; built from the run's params when omitted

    Returns:
        Max relative residual, 0 for a vanishing trajectory

    Raises:
        ValueError: On too few or non-uniform samples, or an unknown identity
    """
    if len(states) < 5:
        raise ValueError(f"energy_balance_residual needs at least 5 samples, got {len(states)}")
    times = np.array([s.t for s in states])
    steps = np.diff(times)
    if np.any(steps <= 0.0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("Samples must be uniformly spaced in time")
    symbol = full_symbol(states[0].params, symbol)
    terms = [balance_terms(s, which, b, nonlinear, symbol) for s in states]
    energies = np.array([bt.energy for bt in terms])
    rates = _derivative(times, energies)
    worst = 0.0
    for rate, bt in zip(rates, terms):
        scale = abs(rate) + bt.scale
        if scale == 0.0:
            continue
        worst = max(worst, abs(rate - bt.rate) / scale)
    logger.debug(f"Energy balance ({which}) over {len(states)} samples: residual {worst:.3e}")
    return worst
