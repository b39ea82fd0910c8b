"""
Unit tests for the periodic grid and its transforms
"""
import numpy as np
import pytest

from src.spectral.grid import GridSpec


def test_grid_rejects_odd_sizes():
    """Test that odd or tiny grid sizes are rejected"""
    with pytest.raises(ValueError, match="even"):
        GridSpec(nx=7, ny=16)
    with pytest.raises(ValueError, match="even"):
        GridSpec(nx=8, ny=2)
    with pytest.raises(ValueError, match="ly must be positive"):
        GridSpec(nx=8, ny=16, ly=0.0)


def test_modes_in_fft_order():
    """Test wavenumbers are in FFT order with Nyquist counted positive"""
    grid = GridSpec(nx=8, ny=16)
    assert grid.k.tolist() == [0, 1, 2, 3, 4, -3, -2, -1]
    assert grid.m[8] == 8
    assert grid.xi[1] == pytest.approx(2.0 * np.pi / grid.ly)


def test_y_grid_is_centred():
    """Test the physical y grid is centred on the zero line of the shear"""
    grid = GridSpec(nx=8, ny=16, ly=4.0)
    assert grid.y[8] == 0.0
    assert grid.y[0] == pytest.approx(-2.0)


def test_transform_roundtrip_and_parseval(rng):
    """Test orthonormal transforms preserve values and energy"""
    grid = GridSpec(nx=8, ny=32, ly=10.0)
    values = rng.normal(size=grid.shape)
    coef = grid.to_spectral(values)
    np.testing.assert_allclose(grid.to_physical(coef), values, atol=1e-12)
    physical_energy = (grid.lx / grid.nx) * (grid.ly / grid.ny) * np.sum(values**2)
    assert grid.cell * np.sum(np.abs(coef) ** 2) == pytest.approx(physical_energy, rel=1e-12)


def test_to_spectral_rejects_wrong_shape():
    """Test shape validation of physical samples"""
    grid = GridSpec(nx=8, ny=16)
    with pytest.raises(ValueError, match="Expected physical array"):
        grid.to_spectral(np.zeros((4, 4)))


def test_dealias_mask_two_thirds_rule():
    """Test the 2/3 rule keeps |k| < nx/3 and always drops Nyquist"""
    grid = GridSpec(nx=12, ny=12)
    assert grid.dealias_mask[grid.k_index(3), 0]
    assert not grid.dealias_mask[grid.k_index(4), 0]
    assert not grid.dealias_mask[0, grid.m_index(4)]

    raw = GridSpec(nx=12, ny=12, dealias=False)
    assert raw.dealias_mask[raw.k_index(5), 0]
    assert not raw.dealias_mask[raw.k_index(6), 0]


def test_y_transform_matrix_matches_row_transform(rng):
    """Test the dense y-transform reproduces the k = 0 row of the 2D transform"""
    grid = GridSpec(nx=4, ny=16, ly=6.0)
    profile = rng.normal(size=grid.ny)
    coef = grid.to_spectral(np.tile(profile, (grid.nx, 1)))
    matrix = grid.y_transform_matrix()
    np.testing.assert_allclose(np.sqrt(grid.nx) * matrix @ profile, coef[0], atol=1e-12)
    np.testing.assert_allclose(matrix.conj().T @ matrix, np.eye(grid.ny), atol=1e-12)


def test_xi_phys_follows_shear():
    """Test the physical frequency of a label drifts by -k * shear_time"""
    grid = GridSpec(nx=8, ny=16)
    shifted = grid.xi_phys(0.5)
    assert shifted[grid.k_index(2), 3] == pytest.approx(grid.xi[3] - 1.0)
    np.testing.assert_allclose(shifted[0], grid.xi)
