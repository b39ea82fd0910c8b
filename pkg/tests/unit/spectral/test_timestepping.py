"""
Unit tests for the integrating-factor stepper
"""
import numpy as np
import pytest

from src.spectral.timestepping import dissipation_integral, lawson_rk4_step


def test_dissipation_integral_closed_form():
    """Test the integral of 1 + s^2 over [0, 1] along a unit-shear characteristic"""
    value = dissipation_integral(np.array([1.0]), np.array([0.0]), 0.0, 1.0)
    assert value[0] == pytest.approx(4.0 / 3.0)


def test_dissipation_integral_is_additive():
    """Test splitting the interval does not change the integral"""
    k = np.array([2.0, -3.0])
    eta = np.array([0.7, 1.9])
    whole = dissipation_integral(k, eta, 0.2, 1.4)
    parts = dissipation_integral(k, eta, 0.2, 0.9) + dissipation_integral(k, eta, 0.9, 1.4)
    np.testing.assert_allclose(whole, parts, rtol=1e-13)


def test_unforced_step_is_exact_decay():
    """Test zero forcing reproduces the exact integrating factor"""
    k = np.array([1.0])
    eta = np.array([0.0])
    state = np.array([[1.0 + 0.5j]])
    out = lawson_rk4_step(state, 0.0, 1.0, np.array([1.0]), k, eta, lambda t, s: np.zeros_like(s))
    assert out[0, 0] == pytest.approx((1.0 + 0.5j) * np.exp(-4.0 / 3.0), rel=1e-14)


def test_forced_step_is_fourth_order():
    """Test a rotating forcing with constant decay matches the exact solution"""
    k = np.array([0.0])
    eta = np.array([1.0])
    state = np.array([[1.0 + 0.0j]])
    h = 0.1
    t = 0.0
    for _ in range(10):
        state = lawson_rk4_step(state, t, h, np.array([1.0]), k, eta, lambda t, s: 1j * s)
        t += h
    assert abs(state[0, 0] - np.exp((-1.0 + 1j) * 1.0)) < 2e-6
