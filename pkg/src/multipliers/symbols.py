"""
Fourier multiplier symbols and their analytic xi-derivatives.

All arguments of phi and phi_k are taken at sgn(k) * xi, so every symbol is even
under (k, xi) -> (-k, -xi). At k = 0 each component is 0; the composite
nonlinear multiplier keeps its constant 1.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterable, Optional, Tuple, Union

import numpy as np

from src.multipliers.profiles import phi_k, phi_profile, solve_xi0
from src.spectral.params import PhysParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class SymbolKind(str, Enum):
    """Multiplier kinds"""

    THETA = "M_k"
    LINEAR = "M_prime"
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    FULL = "M"


COMPONENTS = ("m1", "m2", "m3")
CORRUPTIONS = {"drop_m2": "m2", "drop_m3": "m3"}


def _phi_scaled(diff: float, k: np.ndarray, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """phi(diff^{1/3} |k|^{-1/3} sgn(k) xi) and its xi-derivative; 0 at k = 0."""
    value = np.zeros(np.broadcast(k, xi).shape)
    slope = np.zeros_like(value)
    kb = np.broadcast_to(k, value.shape)
    xb = np.broadcast_to(xi, value.shape)
    nonzero = kb != 0
    if not np.any(nonzero):
        return value, slope
    kn = kb[nonzero]
    scale = diff ** (1.0 / 3.0) * np.abs(kn) ** (-1.0 / 3.0)
    v, dv = phi_profile(scale * np.sign(kn) * xb[nonzero])
    value[nonzero] = v
    slope[nonzero] = np.asarray(dv) * scale * np.sign(kn)
    return value, slope


def _phi_k_all(nu: float, k: np.ndarray, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """phi_k(sgn(k) xi) for every k in the broadcast, grouped by wavenumber."""
    value = np.zeros(np.broadcast(k, xi).shape)
    slope = np.zeros_like(value)
    kb = np.broadcast_to(k, value.shape)
    xb = np.broadcast_to(xi, value.shape)
    for kval in np.unique(kb):
        if kval == 0:
            continue
        sel = kb == kval
        sign = 1.0 if kval > 0 else -1.0
        v, dv = phi_k(nu, int(kval), sign * xb[sel])
        value[sel] = v
        slope[sel] = sign * np.asarray(dv)
    return value, slope


def _arctan_component(k: np.ndarray, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(1/k^2)(arctan(xi/k) + pi/2) with derivative 1/(k (k^2 + xi^2))."""
    value = np.zeros(np.broadcast(k, xi).shape)
    slope = np.zeros_like(value)
    kb = np.broadcast_to(k, value.shape).astype(float)
    xb = np.broadcast_to(xi, value.shape)
    nonzero = kb != 0
    kn = kb[nonzero]
    xn = xb[nonzero]
    value[nonzero] = (np.arctan(xn / kn) + 0.5 * math.pi) / kn**2
    slope[nonzero] = 1.0 / (kn * (kn**2 + xn**2))
    return value, slope


@dataclass(frozen=True)
class MultiplierSymbol:
    """
    Evaluable multiplier symbol.

    ``dropped`` lists composite components left out on purpose; it is only
    non-empty for negative-control variants of the full multiplier.
    """

    kind: SymbolKind
    params: PhysParams
    dropped: FrozenSet[str] = frozenset()

    def _parts(self) -> Iterable[str]:
        if self.kind == SymbolKind.THETA:
            return ("theta",)
        if self.kind == SymbolKind.LINEAR:
            return ("m1", "m2")
        if self.kind == SymbolKind.FULL:
            return tuple(c for c in COMPONENTS if c not in self.dropped)
        return (self.kind.value.lower(),)

    def _evaluate_part(self, part: str, k: np.ndarray, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if part == "theta":
            return _phi_scaled(self.params.eta, k, xi)
        if part == "m1":
            return _phi_scaled(self.params.nu, k, xi)
        if part == "m2":
            return _phi_k_all(self.params.nu, k, xi)
        return _arctan_component(k, xi)

    def value_and_dxi(self, k: ArrayLike, xi: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate the symbol and its xi-derivative.

        Args:
            k: x-wavenumber(s), integers
            xi: y-frequency(ies)

        Returns:
            Tuple of (value, dxi) broadcast over k and xi
        """
        k = np.asarray(k, dtype=int)
        xi = np.asarray(xi, dtype=float)
        value = np.zeros(np.broadcast(k, xi).shape)
        slope = np.zeros_like(value)
        for part in self._parts():
            v, dv = self._evaluate_part(part, k, xi)
            value += v
            slope += dv
        if self.kind == SymbolKind.FULL:
            value += 1.0
        return value, slope

    def value(self, k: ArrayLike, xi: ArrayLike) -> np.ndarray:
        return self.value_and_dxi(k, xi)[0]

    def dxi(self, k: ArrayLike, xi: ArrayLike) -> np.ndarray:
        return self.value_and_dxi(k, xi)[1]


def build_symbol(kind: Union[SymbolKind, str], params: PhysParams, corrupt: Optional[str] = None) -> MultiplierSymbol:
    """
    Build a multiplier symbol.

    Args:
        kind: Symbol kind (enum member or its value)
        params: Physical parameters; eta feeds M_k, nu every other kind
        corrupt: Optional negative-control variant of the full multiplier,
            "drop_m2" or "drop_m3"

    Returns:
        MultiplierSymbol

    Raises:
        ValueError: If the needed diffusivity is not positive or the corruption is unknown
    """
    kind = SymbolKind(kind)
    diff = params.eta if kind == SymbolKind.THETA else params.nu
    if diff <= 0.0:
        raise ValueError(f"Symbol {kind.value} needs a positive diffusivity, got {diff}")
    dropped: FrozenSet[str] = frozenset()
    if corrupt is not None:
        if corrupt not in CORRUPTIONS:
            raise ValueError(f"Unknown corruption: {corrupt}")
        if kind != SymbolKind.FULL:
            raise ValueError(f"Corruption {corrupt} only applies to the full multiplier")
        dropped = frozenset({CORRUPTIONS[corrupt]})
        logger.info(f"Built negative-control multiplier without {CORRUPTIONS[corrupt]}")
    return MultiplierSymbol(kind=kind, params=params, dropped=dropped)


def max_linear_multiplier(nu: float, k: int) -> float:
    """Upper bound 1 + sup phi_k of M'_k; the supremum of phi_k is its constant top branch."""
    if k == 0:
        return 0.0
    xi0 = solve_xi0(nu, k).xi0
    return 1.0 + 6.0 * (k**2 + xi0**2) ** 2 / k**4 - (2.0 + math.pi)
