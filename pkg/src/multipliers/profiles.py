"""
Scalar building blocks of the Fourier multipliers: the saturating profile phi,
the branch threshold xi0 and the three-branch symbol phi_k.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

FOUR_MINUS_PI = 4.0 - math.pi
TWO_PLUS_PI = 2.0 + math.pi
XI0_CONSTANT = 96.0


def phi_profile(x: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    C1 saturating profile phi(x) = 1/2 + g(x)/4 and its slope.

    g is odd, equal to x on [-1, 1] and to sign(x)(2 - e^{1-|x|}) outside, so
    phi takes values in (0, 1), phi' = 1/4 on [-1, 1] and 0 < phi' <= 1/4.

    Args:
        x: Argument(s)

    Returns:
        Tuple of (phi(x), phi'(x))
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    outer = ax > 1.0
    decay = np.exp(1.0 - np.where(outer, ax, 1.0))
    g = np.where(outer, np.sign(x) * (2.0 - decay), x)
    dg = np.where(outer, decay, 1.0)
    value = 0.5 + 0.25 * g
    slope = 0.25 * dg
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope


@dataclass(frozen=True)
class XiZero:
    """Positive root of nu * xi * (k^2 + xi^2) = 96 |k|."""

    nu: float
    k: int
    xi0: float
    iterations: int

    @property
    def residual(self) -> float:
        """Relative residual of the defining cubic."""
        target = XI0_CONSTANT * abs(self.k)
        return abs(self.nu * self.xi0 * (self.k**2 + self.xi0**2) - target) / target


def _newton_bisection(nu: float, kabs: int, tol: float = 1e-15, maxit: int = 200) -> Tuple[float, int]:
    """Safeguarded Newton iteration with bisection fallback on the bracketing interval."""

    def func(x: float) -> Tuple[float, float]:
        return nu * x * (kabs**2 + x**2) - XI0_CONSTANT * kabs, nu * (kabs**2 + 3.0 * x**2)

    xlo = 0.0
    xhi = XI0_CONSTANT / (nu * kabs)
    x = 0.5 * (xlo + xhi)
    dxold = abs(xhi - xlo)
    dx = dxold
    f, df = func(x)
    n = 1
    for _ in range(maxit):
        if ((x - xhi) * df - f) * ((x - xlo) * df - f) >= 0.0 or abs(2.0 * f) > abs(dxold * df):
            dxold = dx
            dx = 0.5 * (xhi - xlo)
            x = xlo + dx
            if xlo == x:
                break
        else:
            dxold = dx
            dx = f / df
            previous = x
            x = x - dx
            if previous == x:
                break
        if abs(dx) < tol * max(x, 1.0):
            break
        f, df = func(x)
        n += 1
        if f < 0.0:
            xlo = x
        else:
            xhi = x
    return x, n


@lru_cache(maxsize=4096)
def solve_xi0(nu: float, k: int) -> XiZero:
    """
    Solve nu * xi0 * (k^2 + xi0^2) = 96 |k| for the unique positive root.

    Args:
        nu: Viscosity, > 0
        k: Nonzero x-wavenumber

    Returns:
        XiZero with the root and iteration count

    Raises:
        ValueError: If nu <= 0 or k == 0
    """
    if nu <= 0.0:
        raise ValueError(f"solve_xi0 requires nu > 0, got {nu}")
    if k == 0:
        raise ValueError("solve_xi0 requires k != 0")
    root, iterations = _newton_bisection(float(nu), abs(int(k)))
    result = XiZero(nu=float(nu), k=int(k), xi0=root, iterations=iterations)
    logger.debug(f"xi0(nu={nu}, k={k}) = {root:.12g} after {iterations} evaluations")
    return result


def phi_k(nu: float, k: int, xi: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Three-branch symbol phi_k and its analytic slope.

    Branches: xi > 0 is constant, -xi0 <= xi <= 0 is the rational branch
    6(k^2+xi0^2)^2/(k^2+xi^2)^2 - (2+pi), and xi < -xi0 decays exponentially from
    the value 4 - pi. The profile is C1 across both breakpoints.

    Args:
        nu: Viscosity, > 0
        k: Nonzero x-wavenumber
        xi: Argument(s); callers pass sgn(k) * xi

    Returns:
        Tuple of (phi_k, phi_k')
    """
    xi0 = solve_xi0(nu, k).xi0
    xi = np.asarray(xi, dtype=float)
    k2 = float(k) ** 2
    anchor = k2 + xi0**2
    rate = 24.0 * xi0 / (FOUR_MINUS_PI * anchor)

    middle_arg = np.clip(xi, -xi0, 0.0)
    denom = k2 + middle_arg**2
    middle = 6.0 * anchor**2 / denom**2 - TWO_PLUS_PI
    middle_slope = -24.0 * middle_arg * anchor**2 / denom**3

    tail_arg = np.minimum(xi + xi0, 0.0)
    tail = FOUR_MINUS_PI * np.exp(rate * tail_arg)
    tail_slope = rate * tail

    top = 6.0 * anchor**2 / k2**2 - TWO_PLUS_PI

    value = np.where(xi > 0.0, top, np.where(xi < -xi0, tail, middle))
    slope = np.where(xi > 0.0, 0.0, np.where(xi < -xi0, tail_slope, middle_slope))
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope
