"""
Initial data for nonlinear runs.
"""
import logging
import math
from typing import Optional

import numpy as np

from src.nonlinear.state import SystemState
from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.operators import dx_power, weighted_norm
from src.spectral.params import PhysParams

logger = logging.getLogger(__name__)


def localized_field(
    grid: GridSpec, rng: np.random.Generator, kmax: int = 2, width: Optional[float] = None
) -> SpectralField:
    """
    Random real field with x-modes |k| <= kmax under a Gaussian y-envelope.

    The coefficients are cut to the dealiasing mask so that products of such
    fields are resolved exactly.
    """
    width = width or grid.ly / 16.0
    x = grid.x[:, None]
    envelope = np.exp(-(grid.y[None, :] ** 2) / (2.0 * width**2))
    values = np.zeros(grid.shape)
    for k in range(kmax + 1):
        a, c = rng.normal(size=2)
        values = values + envelope * (a * np.cos(k * x) + c * np.sin(k * x))
    coef = grid.to_spectral(values)
    return SpectralField(grid, np.where(grid.dealias_mask, coef, 0.0))


def _mean_free(f: SpectralField) -> SpectralField:
    coef = f.coef.copy()
    coef[0, 0] = 0.0
    return f.with_coef(coef)


def build_initial_state(
    grid: GridSpec,
    params: PhysParams,
    eps: float,
    alpha: float,
    beta: float,
    delta: float,
    rng: np.random.Generator,
    fill: float = 0.5,
    kmax: int = 2,
) -> SystemState:
    """
    Random y-localized data scaled inside the small-data hypotheses.

    After scaling ||theta||_{H^b} <= fill eps nu^alpha,
    ||(w, j)||_{H^b} = fill eps nu^beta and
    ||D_x|^{1/3} theta||_{H^b} <= fill eps nu^delta, with equality in the
    tighter of the two theta conditions. The mean of w and j is removed.

    Args:
        grid: Grid of the run
        params: Physical parameters; nu and b enter the scaling
        eps: Smallness parameter; eps = 0 gives the zero state
        alpha: theta exponent
        beta: (w, j) exponent
        delta: |D_x|^{1/3} theta exponent
        rng: Seeded generator
        fill: Fraction of each envelope actually used
        kmax: Largest x-wavenumber excited

    Returns:
        SystemState at t = 0
    """
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if not 0.0 < fill <= 1.0:
        raise ValueError(f"fill must be in (0, 1], got {fill}")
    nu, b = params.nu, params.b
    theta = localized_field(grid, rng, kmax)
    w = _mean_free(localized_field(grid, rng, kmax))
    j = _mean_free(localized_field(grid, rng, kmax))
    if eps == 0.0:
        return SystemState.zeros(grid, params)

    theta_norm = weighted_norm(theta, 0.0, b)
    theta_dx_norm = weighted_norm(dx_power(theta, 1.0 / 3.0), 0.0, b)
    limits = [nu**alpha / theta_norm]
    if theta_dx_norm > 0.0:
        limits.append(nu**delta / theta_dx_norm)
    theta_scale = fill * eps * min(limits)

    wj_norm = math.hypot(weighted_norm(w, 0.0, b), weighted_norm(j, 0.0, b))
    wj_scale = fill * eps * nu**beta / wj_norm
    logger.info(f"Initial data scaled by {theta_scale:.3e} (theta) and {wj_scale:.3e} (w, j) for eps={eps:g}")
    return SystemState(w=w * wj_scale, j=j * wj_scale, theta=theta * theta_scale, t=0.0, params=params)
