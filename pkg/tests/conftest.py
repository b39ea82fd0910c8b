"""
Pytest configuration and fixtures
"""
import numpy as np
import pytest

from src.config.settings import Settings, get_test_settings
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams


@pytest.fixture
def settings() -> Settings:
    """Provide test settings"""
    return get_test_settings()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid() -> GridSpec:
    """Small dealiased grid on a short y-period"""
    return GridSpec(nx=8, ny=32, ly=8.0 * np.pi)


@pytest.fixture
def oracle_grid() -> GridSpec:
    """Grid small enough for the dense oracle"""
    return GridSpec(nx=8, ny=128, ly=16.0 * np.pi, dealias=False)


@pytest.fixture
def unit_params() -> PhysParams:
    """nu = mu = eta = 1"""
    return PhysParams(nu=1.0, mu=1.0, eta=1.0, b=1.1)


@pytest.fixture
def diffusive_params() -> PhysParams:
    """nu = mu = eta = 0.1"""
    return PhysParams(nu=0.1, mu=0.1, eta=0.1, b=1.1)


def gaussian_field_values(grid: GridSpec, rng: np.random.Generator, kmax: int = 2, width: float = 2.0) -> np.ndarray:
    """Real y-localized physical samples with a few low x-modes."""
    x = grid.x[:, None]
    y = grid.y[None, :]
    envelope = np.exp(-(y**2) / (2.0 * width**2))
    values = envelope * rng.normal()
    for k in range(1, kmax + 1):
        a, b = rng.normal(size=2)
        values = values + envelope * (a * np.cos(k * x) + b * np.sin(k * x))
    return values


@pytest.fixture
def make_gaussian():
    """Factory for y-localized random physical samples"""
    return gaussian_field_values
