"""
Spectral field container.
"""
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from src.spectral.grid import GridSpec

Scalar = Union[int, float, complex]


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    Fourier coefficients of a scalar field.

    ``shear_time`` records how long the Couette transport has acted on the labels:
    the coefficient stored at y-frequency label eta has physical frequency
    eta - k * shear_time. A field with shear_time == 0 is in the lab frame.
    """

    grid: GridSpec
    coef: np.ndarray
    shear_time: float = 0.0

    def __post_init__(self) -> None:
        coef = np.asarray(self.coef, dtype=complex)
        if coef.shape != self.grid.shape:
            raise ValueError(f"Coefficient array shape {coef.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(coef)):
            raise ValueError("Spectral field contains NaN or Inf coefficients")
        object.__setattr__(self, "coef", coef)

    @classmethod
    def zeros(cls, grid: GridSpec, shear_time: float = 0.0) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex), shear_time)

    @classmethod
    def from_physical(cls, grid: GridSpec, values: np.ndarray, shear_time: float = 0.0) -> "SpectralField":
        return cls(grid, grid.to_spectral(values), shear_time)

    def to_physical(self) -> np.ndarray:
        return self.grid.to_physical(self.coef)

    @property
    def xi_phys(self) -> np.ndarray:
        return self.grid.xi_phys(self.shear_time)

    def with_coef(self, coef: np.ndarray) -> "SpectralField":
        return replace(self, coef=coef)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coef))) if self.coef.size else 0.0

    def is_real(self, rtol: float = 1e-12) -> bool:
        """Check coef(-k,-xi) == conj(coef(k,xi)) on the non-Nyquist modes."""
        mirrored = np.conj(np.roll(np.flip(self.coef, axis=(0, 1)), shift=(1, 1), axis=(0, 1)))
        mask = (np.abs(self.grid.k)[:, None] < self.grid.nx // 2) & (np.abs(self.grid.m)[None, :] < self.grid.ny // 2)
        scale = max(self.max_abs(), 1e-300)
        return bool(np.max(np.abs(self.coef - mirrored)[mask], initial=0.0) <= rtol * scale)

    def check_compatible(self, other: "SpectralField") -> None:
        if other.grid != self.grid:
            raise ValueError("Spectral fields live on different grids")
        if other.shear_time != self.shear_time:
            raise ValueError(
                f"Spectral fields are in different frames: {self.shear_time} vs {other.shear_time}"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self.check_compatible(other)
        return self.with_coef(self.coef + other.coef)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self.check_compatible(other)
        return self.with_coef(self.coef - other.coef)

    def __mul__(self, scalar: Scalar) -> "SpectralField":
        return self.with_coef(self.coef * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coef(-self.coef)
