"""
Integrating-factor Runge-Kutta stepping in the moving frame.

Along a shear characteristic the label eta is fixed and the physical frequency is
eta - k s, so the dissipation rate kappa * (k^2 + (eta - k s)^2) is a known
quadratic in s. Its integral is evaluated in closed form, which makes the
diagonal dissipation exact and leaves only the bounded couplings (and the
nonlinear terms) to the explicit fourth-order stages.
"""
from typing import Callable

import numpy as np

Forcing = Callable[[float, np.ndarray], np.ndarray]


def dissipation_integral(k: np.ndarray, eta_label: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """
    Closed form of the integral of k^2 + (eta - k s)^2 over s in [t0, t1].

    Args:
        k: x-wavenumbers, broadcastable against eta_label
        eta_label: Moving-frame y-frequencies
        t0: Start time
        t1: End time

    Returns:
        Array of integrals
    """
    span = t1 - t0
    return (
        (k**2 + eta_label**2) * span
        - eta_label * k * (t1**2 - t0**2)
        + k**2 * (t1**3 - t0**3) / 3.0
    )


def lawson_rk4_step(
    state: np.ndarray,
    t: float,
    h: float,
    kappa: np.ndarray,
    k: np.ndarray,
    eta_label: np.ndarray,
    forcing: Forcing,
) -> np.ndarray:
    """
    Advance ``state`` by one Lawson (integrating-factor) RK4 step.

    Args:
        state: Stacked fields, shape (nfields, ...) with trailing shape matching k/eta_label
        t: Current time
        h: Step size
        kappa: Diffusivity per field, shape (nfields,)
        k: x-wavenumbers broadcast to the trailing shape
        eta_label: Moving-frame frequencies broadcast to the trailing shape
        forcing: Non-diagonal right-hand side N(t, state)

    Returns:
        State at t + h
    """
    mid = t + 0.5 * h
    end = t + h
    rates = np.asarray(kappa, dtype=float).reshape((-1,) + (1,) * (state.ndim - 1))
    e_first = np.exp(-rates * dissipation_integral(k, eta_label, t, mid))
    e_second = np.exp(-rates * dissipation_integral(k, eta_label, mid, end))
    e_full = e_first * e_second

    k1 = forcing(t, state)
    k2 = forcing(mid, e_first * (state + 0.5 * h * k1))
    k3 = forcing(mid, e_first * state + 0.5 * h * k2)
    k4 = forcing(end, e_full * state + h * e_second * k3)
    return e_full * (state + (h / 6.0) * k1) + (h / 6.0) * (2.0 * e_second * (k2 + k3) + k4)


def linear_forcing(kk: np.ndarray, eta_label: np.ndarray) -> Forcing:
    """
    Off-diagonal part of the linear generator in moving-frame labels.

    The theta row is identically 0, so theta never reads (w, j).
    """

    def forcing(t: float, data: np.ndarray) -> np.ndarray:
        theta, w, j = data[0], data[1], data[2]
        xi = eta_label - kk * t
        lap = kk**2 + xi**2
        closure = np.zeros(np.broadcast(kk, xi).shape)
        np.divide(2.0 * kk * xi, lap, out=closure, where=lap > 0.0)
        out = np.empty_like(data)
        out[0] = 0.0
        out[1] = 1j * kk * (j + theta)
        out[2] = 1j * kk * w - closure * j
        return out

    return forcing
