"""
Solver state containers.
"""
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel

from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.operators import biot_savart
from src.spectral.params import PhysParams

FIELD_ORDER = ("theta", "w", "j")


@dataclass(frozen=True)
class SystemState:
    """
    Vorticity, current density and temperature at time t.

    Solver states live in the moving frame: every field carries shear_time == t
    when it was produced by time stepping from lab-frame data at t = 0.
    """

    w: SpectralField
    j: SpectralField
    theta: SpectralField
    t: float
    params: PhysParams

    def __post_init__(self) -> None:
        self.w.check_compatible(self.j)
        self.w.check_compatible(self.theta)

    @property
    def grid(self) -> GridSpec:
        return self.w.grid

    @property
    def shear_time(self) -> float:
        return self.w.shear_time

    def stack(self) -> np.ndarray:
        """Coefficients stacked in FIELD_ORDER, shape (3, nx, ny)."""
        return np.stack([self.theta.coef, self.w.coef, self.j.coef])

    @classmethod
    def from_stack(
        cls, grid: GridSpec, data: np.ndarray, t: float, params: PhysParams, shear_time: float
    ) -> "SystemState":
        fields = {name: SpectralField(grid, data[i], shear_time) for i, name in enumerate(FIELD_ORDER)}
        return cls(w=fields["w"], j=fields["j"], theta=fields["theta"], t=t, params=params)

    @classmethod
    def zeros(cls, grid: GridSpec, params: PhysParams, t: float = 0.0) -> "SystemState":
        z = SpectralField.zeros(grid, shear_time=t)
        return cls(w=z, j=z, theta=z, t=t, params=params)

    def fields(self) -> Dict[str, SpectralField]:
        return {"theta": self.theta, "w": self.w, "j": self.j}

    def with_fields(self, **changes) -> "SystemState":
        return replace(self, **changes)

    def velocity(self) -> Tuple[SpectralField, SpectralField]:
        return biot_savart(self.w)

    def magnetic(self) -> Tuple[SpectralField, SpectralField]:
        return biot_savart(self.j)

    def is_real(self, rtol: float = 1e-10) -> bool:
        return all(f.is_real(rtol) for f in self.fields().values())

    def max_amplitude(self) -> float:
        return max(f.max_abs() for f in self.fields().values())


class StepStats(BaseModel):
    """Diagnostics of one time step"""

    step: int
    t: float
    dt: float
    cfl: float
    dealias_energy_removed: float  # largest over the RK stages
    max_amplitude: float
    wrap_energy_fraction: float
