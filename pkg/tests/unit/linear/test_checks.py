"""
Unit tests for the linear decay and energy checks
"""
import math

import numpy as np
import pytest

from src.linear.characteristics import integrate_spectrum
from src.linear.checks import (
    check_derivative_norms,
    check_theta_decay,
    check_theta_multiplier_energy,
    check_wj_decay,
    fit_decay,
    spacetime_norms,
    theta_energy_residual,
    theta_rate_floor,
    wj_rate_floor,
)
from src.nonlinear.state import SystemState
from src.spectral.field import SpectralField
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams


def _run(grid, params, values, t_max, sample_dt, theta=True, wj=True):
    f = SpectralField.from_physical(grid, values)
    z = SpectralField.zeros(grid)
    init = SystemState(w=f if wj else z, j=f if wj else z, theta=f if theta else z, t=0.0, params=params)
    return integrate_spectrum(init, t_max, dt=0.01, sample_dt=sample_dt)


def test_fit_decay_recovers_exponential():
    """Test the tail fit of an exact exponential"""
    times = np.linspace(0.0, 10.0, 101)
    rate, prefactor = fit_decay(times, 3.0 * np.exp(-0.7 * times))
    assert rate == pytest.approx(0.7, rel=1e-10)
    assert prefactor == pytest.approx(3.0, rel=1e-8)


def test_fit_decay_of_underflowed_series_is_infinite():
    """Test a norm that vanishes in the window counts as infinitely fast decay"""
    times = np.linspace(0.0, 4.0, 5)
    assert fit_decay(times, np.array([1.0, 0.5, 0.0, 0.0, 0.0]))[0] == math.inf
    assert fit_decay(times, np.zeros(5))[0] == math.inf


def test_rate_floors_scale_with_diffusivity():
    """Test the theta floor halves when eta drops by a factor 8"""
    assert theta_rate_floor(1.0 / 8.0, 1) == pytest.approx(0.5 * theta_rate_floor(1.0, 1))
    assert theta_rate_floor(1.0, 1) == pytest.approx(1.0 / 16.0)
    assert 0.0 < wj_rate_floor(1.0, 1) < 1.0 / 8.0
    assert wj_rate_floor(1.0, 0) == 0.0


def test_theta_decay_bound_holds_pointwise(small_grid, unit_params, make_gaussian, rng):
    """Test the explicit theta bound at every sample and the k = 0 monotonicity"""
    series = _run(small_grid, unit_params, make_gaussian(small_grid, rng), 16.0, 0.25, wj=False)
    fit = check_theta_decay(series, 1)
    assert fit.passed
    assert fit.max_bound_ratio <= 1.0
    assert fit.rate >= fit.rate_floor
    norms = series.mode_norms("theta")[:, small_grid.k_index(1)]
    assert norms[-1] <= math.sqrt(2.0) * math.exp(-1.0) * norms[0]
    assert check_theta_decay(series, 0).passed


def test_theta_decay_at_small_eta(small_grid, make_gaussian, rng):
    """Test the check still passes with the halved floor at eta = 1/8"""
    params = PhysParams(nu=0.125, mu=0.125, eta=0.125)
    series = _run(small_grid, params, make_gaussian(small_grid, rng), 16.0, 0.25, wj=False)
    fit = check_theta_decay(series, 1)
    assert fit.passed
    assert fit.rate_floor == pytest.approx(theta_rate_floor(1.0, 1) / 2.0)


def test_wj_decay_from_wj_only_data(small_grid, unit_params, make_gaussian, rng):
    """Test (w, j) decay at nu = mu = eta = 1 beats the Gronwall floor"""
    series = _run(small_grid, unit_params, make_gaussian(small_grid, rng), 8.0, 0.25, theta=False)
    fit = check_wj_decay(series, 1)
    assert fit.passed
    assert fit.bracket_ratio > 0.0


def test_wj_decay_from_theta_only_data(small_grid, unit_params, make_gaussian, rng):
    """Test w excited by the buoyancy coupling still decays above the floor"""
    series = _run(small_grid, unit_params, make_gaussian(small_grid, rng), 8.0, 0.25, wj=False)
    assert np.max(series.wj_norms()[:, small_grid.k_index(1)]) > 0.0
    assert check_wj_decay(series, 1).passed


def test_zero_data_passes_trivially(small_grid, unit_params):
    """Test zero data yields infinite rates and passing fits"""
    series = _run(small_grid, unit_params, np.zeros(small_grid.shape), 1.0, 0.25)
    assert check_wj_decay(series, 1).passed
    assert check_theta_decay(series, 1).passed


def test_derivative_norms(small_grid, unit_params, make_gaussian, rng):
    """Test D_y and D_y^2 norms of theta and (w, j) decay above their floors"""
    series = _run(small_grid, unit_params, make_gaussian(small_grid, rng), 12.0, 0.25)
    for order in (1, 2):
        theta_fit = check_derivative_norms(series, 1, order, "theta")
        wj_fit = check_derivative_norms(series, 1, order, "wj")
        assert theta_fit.passed and wj_fit.passed
    assert check_derivative_norms(series, 1, 1, "theta").rate_floor == pytest.approx(1.0 / 32.0)
    assert check_derivative_norms(series, 1, 0, "theta") == check_theta_decay(series, 1)
    with pytest.raises(ValueError, match="order"):
        check_derivative_norms(series, 1, 3)


def test_theta_multiplier_energy_gronwall(small_grid, unit_params, make_gaussian, rng):
    """Test the multiplier-weighted theta energy decays at least at the Gronwall rate"""
    series = _run(small_grid, unit_params, make_gaussian(small_grid, rng), 4.0, 0.05, wj=False)
    fit = check_theta_multiplier_energy(series, 1)
    assert fit.passed
    assert fit.max_bound_ratio <= 1.0


def test_theta_energy_identity_residual(small_grid, make_gaussian, rng):
    """Test the time-integrated theta energy identity and its fourth-order convergence"""
    params = PhysParams(nu=0.5, mu=0.5, eta=0.5)
    values = make_gaussian(small_grid, rng)
    fine = _run(small_grid, params, values, 2.0, 0.005, wj=False)
    assert theta_energy_residual(fine, k=1) <= 1e-6
    assert theta_energy_residual(fine, k=0) <= 1e-6
    coarse = _run(small_grid, params, values, 2.0, 0.04, wj=False)
    half = _run(small_grid, params, values, 2.0, 0.02, wj=False)
    assert theta_energy_residual(coarse, k=1) > 8.0 * theta_energy_residual(half, k=1)


def test_spacetime_norms_zero_and_linearity(small_grid, unit_params, make_gaussian, rng):
    """Test zero data gives zero terms and doubling data doubles every term"""
    zero = spacetime_norms(_run(small_grid, unit_params, np.zeros(small_grid.shape), 1.0, 0.25), 1.1)
    assert zero.lhs == 0.0
    assert zero.measured_constant == 0.0

    values = make_gaussian(small_grid, rng)
    single = spacetime_norms(_run(small_grid, unit_params, values, 2.0, 0.1), 1.1)
    double = spacetime_norms(_run(small_grid, unit_params, 2.0 * values, 2.0, 0.1), 1.1)
    for name, value in single.terms.items():
        assert double.terms[name] == pytest.approx(2.0 * value, rel=1e-9)
    assert 0.0 < single.measured_constant < math.inf


def test_spacetime_constant_is_stable_under_refinement(unit_params, make_gaussian):
    """Test the measured space-time constant changes by under 5% when the grid is doubled"""
    constants = []
    for nx, ny in ((16, 128), (32, 256)):
        grid = GridSpec(nx=nx, ny=ny, ly=16.0 * np.pi)
        values = make_gaussian(grid, np.random.default_rng(2024))
        report = spacetime_norms(_run(grid, unit_params, values, 2.0, 0.1, wj=False), 1.1)
        constants.append(report.measured_constant)
    assert 0.0 < constants[0] < math.inf
    assert constants[1] == pytest.approx(constants[0], rel=0.05)
