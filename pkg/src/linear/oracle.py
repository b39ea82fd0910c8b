"""
Brute-force matrix-exponential oracle for the linear system.

The generator is assembled per x-wavenumber in lab-frame y-space on the truncated
periodic grid: Couette transport is the diagonal -i k y, dissipation and the
b1 closure are dense blocks conjugated through the y transform, and the
couplings are scalar multiples of the identity. Moving-frame input is turned
into lab-frame samples with the phase e^{-i k s y} and back with its inverse.
"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import expm

from src.config.settings import Settings, get_settings
from src.nonlinear.state import SystemState
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams
from src.utils.errors import OracleSizeError

logger = logging.getLogger(__name__)


def generator(grid: GridSpec, params: PhysParams, k: int) -> np.ndarray:
    """
    Dense (3 ny) x (3 ny) generator acting on lab-frame y samples of (theta, w, j).

    Args:
        grid: Grid
        params: Physical parameters
        k: x-wavenumber

    Returns:
        Complex generator matrix
    """
    ny = grid.ny
    F = grid.y_transform_matrix()
    Fh = F.conj().T
    xi = grid.xi
    lap = k**2 + xi**2
    D = Fh @ np.diag(-lap) @ F
    inv = np.zeros_like(lap)
    np.divide(1.0, lap, out=inv, where=lap > 0.0)
    B1 = Fh @ np.diag(1j * xi * inv) @ F
    transport = -1j * k * np.diag(grid.y)
    eye = np.eye(ny)

    A = np.zeros((3 * ny, 3 * ny), dtype=complex)
    th, w, j = slice(0, ny), slice(ny, 2 * ny), slice(2 * ny, 3 * ny)
    A[th, th] = transport + params.eta * D
    A[w, w] = transport + params.nu * D
    A[w, j] = 1j * k * eye
    A[w, th] = 1j * k * eye
    A[j, j] = transport + params.mu * D + 2j * k * B1
    A[j, w] = 1j * k * eye
    return A


def dense_oracle(init: SystemState, t: float, settings: Optional[Settings] = None) -> SystemState:
    """
    Evolve init by time t with the exact exponential of the truncated generator.

    Args:
        init: Initial state (any frame)
        t: Elapsed time, >= 0
        settings: Settings override (size cap)

    Returns:
        State at init.t + t in the frame with shear_time == init.shear_time + t

    Raises:
        OracleSizeError: If ny exceeds the configured cap
        ValueError: If t < 0
    """
    settings = settings or get_settings()
    grid = init.grid
    if grid.ny > settings.ORACLE_MAX_NY:
        raise OracleSizeError(f"dense oracle supports ny <= {settings.ORACLE_MAX_NY}, got {grid.ny}")
    if t < 0.0:
        raise ValueError(f"oracle time must be non-negative, got {t}")
    s0 = init.shear_time
    s1 = s0 + t
    F = grid.y_transform_matrix()
    Fh = F.conj().T
    y = grid.y
    data = init.stack()
    out = np.empty_like(data)
    logger.debug(f"Dense oracle on {grid.shape} for t={t}")
    for row, k in enumerate(grid.k):
        k = int(k)
        samples = np.concatenate([np.exp(-1j * k * s0 * y) * (Fh @ data[f, row]) for f in range(3)])
        if np.any(samples):
            samples = expm(generator(grid, init.params, k) * t) @ samples
        for f in range(3):
            block = samples[f * grid.ny:(f + 1) * grid.ny]
            out[f, row] = F @ (np.exp(1j * k * s1 * y) * block)
    return SystemState.from_stack(grid, out, init.t + t, init.params, s1)
