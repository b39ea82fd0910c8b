"""
Grids, transforms, Biot-Savart inversion and the moving-frame weight.
"""
from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.operators import (
    biot_savart,
    dealiased_product,
    lambda_symbol,
    project_nonzero,
    project_zero,
    remap_to_lab,
    shear_advect,
    weighted_norm,
    zero_mode_velocity,
)
from src.spectral.params import PhysParams

__all__ = [
    "GridSpec",
    "PhysParams",
    "SpectralField",
    "biot_savart",
    "dealiased_product",
    "lambda_symbol",
    "project_nonzero",
    "project_zero",
    "remap_to_lab",
    "shear_advect",
    "weighted_norm",
    "zero_mode_velocity",
]
