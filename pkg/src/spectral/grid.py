"""
Periodic grid on the truncated Couette domain T x [-ly/2, ly/2).
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

LX = 2.0 * math.pi


def _signed_modes(n: int) -> np.ndarray:
    """Integer mode numbers in FFT order, Nyquist counted as +n/2."""
    modes = sfft.fftfreq(n, d=1.0 / n)
    modes[n // 2] = n // 2
    return np.rint(modes).astype(int)


@dataclass(frozen=True)
class GridSpec:
    """
    Grid specification for spectral fields.

    Coefficients are stored in FFT order with shape (nx, ny): axis 0 carries the
    x-wavenumber k, axis 1 the y-frequency index m, with xi = m * 2*pi/ly.
    Transforms are orthonormal so that cell * sum|coef|^2 approximates the
    continuum L2 norm. The physical y coordinate is centred on 0, which is the
    line where the Couette background velocity vanishes.
    """

    nx: int
    ny: int
    ly: float = 16.0 * math.pi
    dealias: bool = True

    def __post_init__(self) -> None:
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if n < 4 or n % 2:
                raise ValueError(f"{name} must be even and >= 4, got {n}")
        if not self.ly > 0:
            raise ValueError(f"ly must be positive, got {self.ly}")

    @property
    def lx(self) -> float:
        return LX

    @property
    def dxi(self) -> float:
        """Spacing of the y-frequency grid."""
        return 2.0 * math.pi / self.ly

    @property
    def cell(self) -> float:
        """Cell measure (2pi/nx)(ly/ny)."""
        return (LX / self.nx) * (self.ly / self.ny)

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @cached_property
    def k(self) -> np.ndarray:
        return _signed_modes(self.nx)

    @cached_property
    def m(self) -> np.ndarray:
        return _signed_modes(self.ny)

    @cached_property
    def xi(self) -> np.ndarray:
        return self.m * self.dxi

    @cached_property
    def kk(self) -> np.ndarray:
        """k broadcast over the coefficient array."""
        return np.broadcast_to(self.k[:, None].astype(float), self.shape)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * (LX / self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * (self.ly / self.ny)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask of retained modes; Nyquist rows and columns are always dropped."""
        keep_k = np.abs(self.k) < self.nx // 2
        keep_m = np.abs(self.m) < self.ny // 2
        if self.dealias:
            keep_k &= 3 * np.abs(self.k) < self.nx
            keep_m &= 3 * np.abs(self.m) < self.ny
        return keep_k[:, None] & keep_m[None, :]

    def xi_phys(self, shear_time: float = 0.0) -> np.ndarray:
        """Physical y-frequency of every label when the frame has been sheared for shear_time."""
        return self.xi[None, :] - self.k[:, None] * shear_time

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        """Forward orthonormal transform of physical samples with shape (nx, ny)."""
        values = np.asarray(values)
        if values.shape != self.shape:
            raise ValueError(f"Expected physical array of shape {self.shape}, got {values.shape}")
        return sfft.fft2(sfft.ifftshift(values, axes=1), norm="ortho")

    def to_physical(self, coef: np.ndarray) -> np.ndarray:
        """Inverse orthonormal transform; returns real samples."""
        return sfft.fftshift(sfft.ifft2(coef, norm="ortho"), axes=1).real

    def y_transform_matrix(self) -> np.ndarray:
        """Dense matrix mapping centred y samples to y coefficients of one k-row."""
        eye = np.eye(self.ny)
        return sfft.fft(sfft.ifftshift(eye, axes=0), axis=0, norm="ortho")

    def k_index(self, k: int) -> int:
        return int(k) % self.nx

    def m_index(self, m: int) -> int:
        return int(m) % self.ny
