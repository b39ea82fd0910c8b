"""
Spectral operators shared by every solver and monitor.

All operators act on SpectralField coefficients. The physical y-frequency of a
coefficient is taken from the field's frame (see SpectralField.shear_time), so
the same code serves lab-frame snapshots and moving-frame solver states.
"""
import logging
from typing import Tuple, Union

import numpy as np

from src.spectral.field import SpectralField

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def lambda_symbol(t: float, b: float, k: ArrayLike, xi: ArrayLike) -> ArrayLike:
    """
    Moving-frame weight (1 + k^2 + (xi + t k)^2)^(b/2).

    Args:
        t: Time
        b: Weight exponent
        k: x-wavenumber(s)
        xi: Physical y-frequency(ies)

    Returns:
        The weight, broadcast over k and xi
    """
    k = np.asarray(k, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return (1.0 + k**2 + (xi + t * k) ** 2) ** (0.5 * b)


def laplacian_symbol(f: SpectralField) -> np.ndarray:
    """k^2 + xi^2 at the field's physical frequencies."""
    return f.grid.kk**2 + f.xi_phys**2


def _inverse_laplacian_symbol(f: SpectralField) -> np.ndarray:
    lap = laplacian_symbol(f)
    inv = np.zeros_like(lap)
    np.divide(1.0, lap, out=inv, where=lap > 0.0)
    return inv


def biot_savart(w: SpectralField) -> Tuple[SpectralField, SpectralField]:
    """
    Recover the divergence-free field -grad^perp (-Delta)^{-1} w.

    The (0,0) mode is set to 0.

    Args:
        w: Vorticity (or current density)

    Returns:
        Tuple of the two velocity (or magnetic) components
    """
    inv = _inverse_laplacian_symbol(w)
    stream = inv * w.coef
    u1 = 1j * w.xi_phys * stream
    u2 = -1j * w.grid.kk * stream
    return w.with_coef(u1), w.with_coef(u2)


def divergence(u1: SpectralField, u2: SpectralField) -> np.ndarray:
    """Spectral divergence i k u1 + i xi u2."""
    return 1j * u1.grid.kk * u1.coef + 1j * u2.xi_phys * u2.coef


def project_zero(f: SpectralField) -> SpectralField:
    """Keep only the x-averaged (k = 0) coefficients."""
    coef = np.zeros_like(f.coef)
    coef[0, :] = f.coef[0, :]
    return f.with_coef(coef)


def project_nonzero(f: SpectralField) -> SpectralField:
    """Zero the k = 0 coefficients."""
    coef = f.coef.copy()
    coef[0, :] = 0.0
    return f.with_coef(coef)


def zero_mode_velocity(w: SpectralField) -> np.ndarray:
    """
    Velocity of the x-average, (i/xi) * w(0, xi), with 0 at xi = 0.

    The k = 0 row is unaffected by shear, so labels are physical frequencies.
    """
    xi = w.grid.xi
    row = w.coef[0, :]
    out = np.zeros_like(row)
    nonzero = xi != 0.0
    out[nonzero] = 1j * row[nonzero] / xi[nonzero]
    return out


def dx(f: SpectralField) -> SpectralField:
    return f.with_coef(1j * f.grid.kk * f.coef)


def dy(f: SpectralField) -> SpectralField:
    return f.with_coef(1j * f.xi_phys * f.coef)


def dx_power(f: SpectralField, s: float) -> SpectralField:
    """|D_x|^s; annihilates k = 0 for s > 0."""
    if s == 0:
        return f
    return f.with_coef(np.abs(f.grid.kk) ** s * f.coef)


def inverse_laplacian_sqrt(f: SpectralField) -> SpectralField:
    """(-Delta)^{-1/2} applied to the non-zero modes only."""
    lap = laplacian_symbol(f)
    symbol = np.zeros_like(lap)
    nonzero = f.grid.kk != 0.0
    symbol[nonzero] = lap[nonzero] ** -0.5
    return f.with_coef(symbol * f.coef)


def apply_lambda(f: SpectralField, t: float, b: float) -> SpectralField:
    return f.with_coef(lambda_symbol(t, b, f.grid.kk, f.xi_phys) * f.coef)


def inner(f: SpectralField, g: SpectralField) -> complex:
    """L2 inner product <f, g> = cell * sum f conj(g)."""
    return complex(f.grid.cell * np.vdot(g.coef, f.coef))


def weighted_norm(f: SpectralField, t: float, b: float, xpow: float = 0.0) -> float:
    """
    Evaluate || |D_x|^xpow Lambda_t^b f ||_{L2} by Plancherel.

    Args:
        f: Field
        t: Time at which Lambda_t is evaluated
        b: Weight exponent
        xpow: Power of |D_x|, must be >= 0

    Returns:
        The weighted norm
    """
    if xpow < 0:
        raise ValueError(f"xpow must be >= 0, got {xpow}")
    weight = lambda_symbol(t, 2.0 * b, f.grid.kk, f.xi_phys)
    if xpow > 0:
        weight = weight * np.abs(f.grid.kk) ** (2.0 * xpow)
    return float(np.sqrt(f.grid.cell * np.sum(weight * np.abs(f.coef) ** 2)))


def gradient_weighted_norm(f: SpectralField, t: float, b: float, xpow: float = 0.0) -> float:
    """|| grad |D_x|^xpow Lambda_t^b f ||."""
    weight = lambda_symbol(t, 2.0 * b, f.grid.kk, f.xi_phys) * laplacian_symbol(f)
    if xpow > 0:
        weight = weight * np.abs(f.grid.kk) ** (2.0 * xpow)
    return float(np.sqrt(f.grid.cell * np.sum(weight * np.abs(f.coef) ** 2)))


def shear_advect(f: SpectralField, dt: float) -> SpectralField:
    """Exact free Couette transport for time dt: a relabelling of the frame."""
    return SpectralField(f.grid, f.coef, f.shear_time + dt)


def remap_to_lab(f: SpectralField) -> SpectralField:
    """
    Re-express a sheared field on the lab-frame frequency grid.

    Each k-row is rolled by k * shear_time / dxi cells. The roll is exact when that
    shift is an integer; otherwise it is rounded and the residual is logged.
    """
    grid = f.grid
    shifts = grid.k * f.shear_time / grid.dxi
    rounded = np.rint(shifts).astype(int)
    residual = float(np.max(np.abs(shifts - rounded)))
    if residual > 1e-9:
        logger.warning(f"Remap at shear_time={f.shear_time} rounds the shift by up to {residual:.3e} cells")
    coef = np.empty_like(f.coef)
    for row, shift in enumerate(rounded):
        coef[row] = np.roll(f.coef[row], -shift)
    return SpectralField(grid, coef, 0.0)


def dealiased_product(f: SpectralField, g: SpectralField) -> Tuple[SpectralField, float]:
    """
    Pointwise product formed on the physical grid and filtered by the 2/3 rule.

    Returns:
        Tuple of (product field, energy of the coefficients removed by the mask)
    """
    f.check_compatible(g)
    grid = f.grid
    values = f.to_physical() * g.to_physical()
    coef = grid.to_spectral(values)
    mask = grid.dealias_mask
    removed = float(grid.cell * np.sum(np.abs(coef[~mask]) ** 2))
    return f.with_coef(np.where(mask, coef, 0.0)), removed


def product_bound_ratio(f: SpectralField, g: SpectralField, t: float, b: float) -> float:
    """||Lambda_t^b (f g)|| / (||Lambda_t^b f|| ||Lambda_t^b g||)."""
    denom = weighted_norm(f, t, b) * weighted_norm(g, t, b)
    if denom == 0.0:
        return 0.0
    product, _ = dealiased_product(f, g)
    return weighted_norm(product, t, b) / denom


def wrap_energy_fraction(f: SpectralField, edge: float = 0.1) -> float:
    """Share of the physical-space energy within ``edge * ly`` of either y-boundary."""
    values = f.to_physical()
    total = float(np.sum(values**2))
    if total == 0.0:
        return 0.0
    near_edge = np.abs(f.grid.y) >= (0.5 - edge) * f.grid.ly
    return float(np.sum(values[:, near_edge] ** 2)) / total
