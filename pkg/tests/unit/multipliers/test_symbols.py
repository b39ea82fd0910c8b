"""
Unit tests for multiplier symbols
"""
import math

import numpy as np
import pytest

from src.multipliers.symbols import SymbolKind, build_symbol
from src.spectral.params import PhysParams

PARAMS = PhysParams(nu=0.5, mu=0.5, eta=0.5)
SAMPLE_XI = np.array([-3.0, -0.5, 0.7, 2.5])


def test_arctan_component_reference_values():
    """Test M3 at xi = 0 and its derivative identity"""
    m3 = build_symbol(SymbolKind.M3, PARAMS)
    assert m3.value(1, 0.0) == pytest.approx(math.pi / 2)
    assert 2 * m3.dxi(2, 0.0) == pytest.approx(0.25)
    xi = np.linspace(-5.0, 5.0, 11)
    np.testing.assert_allclose(3 * m3.dxi(3, xi), 1.0 / (9.0 + xi**2))


def test_full_multiplier_at_zero_mode():
    """Test the composite multiplier is 1 on the x-average"""
    full = build_symbol(SymbolKind.FULL, PARAMS)
    np.testing.assert_allclose(full.value(0, np.linspace(-10.0, 10.0, 21)), 1.0)
    np.testing.assert_allclose(full.dxi(0, np.linspace(-10.0, 10.0, 21)), 0.0)
    for kind in (SymbolKind.M1, SymbolKind.M2, SymbolKind.M3, SymbolKind.LINEAR, SymbolKind.THETA):
        assert build_symbol(kind, PARAMS).value(0, 1.3) == 0.0


def test_full_multiplier_lower_bound():
    """Test M >= 1 everywhere on a sample grid"""
    full = build_symbol(SymbolKind.FULL, PARAMS)
    k = np.arange(-4, 5)[:, None]
    xi = np.linspace(-60.0, 60.0, 601)[None, :]
    assert np.all(full.value(k, xi) >= 1.0)


@pytest.mark.parametrize("kind", list(SymbolKind))
def test_symbols_are_even_in_k_and_xi(kind):
    """Test every symbol depends on |k| and sgn(k) xi only"""
    symbol = build_symbol(kind, PARAMS)
    for k in (1, 2, 5):
        np.testing.assert_allclose(symbol.value(k, SAMPLE_XI), symbol.value(-k, -SAMPLE_XI))
        np.testing.assert_allclose(k * symbol.dxi(k, SAMPLE_XI), -k * symbol.dxi(-k, -SAMPLE_XI))


@pytest.mark.parametrize("kind", list(SymbolKind))
@pytest.mark.parametrize("k", [1, -2, 3])
def test_dxi_matches_central_differences(kind, k):
    """Test analytic derivatives against central differences away from breakpoints"""
    symbol = build_symbol(kind, PARAMS)
    h = 1e-5
    fd = (symbol.value(k, SAMPLE_XI + h) - symbol.value(k, SAMPLE_XI - h)) / (2.0 * h)
    np.testing.assert_allclose(symbol.dxi(k, SAMPLE_XI), fd, rtol=1e-6, atol=1e-9)


def test_linear_symbol_is_sum_of_components():
    """Test M' = M1 + M2"""
    linear = build_symbol(SymbolKind.LINEAR, PARAMS)
    m1 = build_symbol(SymbolKind.M1, PARAMS)
    m2 = build_symbol(SymbolKind.M2, PARAMS)
    np.testing.assert_allclose(linear.value(2, SAMPLE_XI), m1.value(2, SAMPLE_XI) + m2.value(2, SAMPLE_XI))


def test_negative_control_drops_component():
    """Test the corrupted multiplier omits the named component"""
    full = build_symbol(SymbolKind.FULL, PARAMS)
    no_m3 = build_symbol(SymbolKind.FULL, PARAMS, corrupt="drop_m3")
    m3 = build_symbol(SymbolKind.M3, PARAMS)
    np.testing.assert_allclose(full.value(1, SAMPLE_XI) - no_m3.value(1, SAMPLE_XI), m3.value(1, SAMPLE_XI))


def test_build_symbol_rejects_bad_requests():
    """Test unknown corruptions, misplaced corruptions and zero diffusivity"""
    with pytest.raises(ValueError, match="Unknown corruption"):
        build_symbol(SymbolKind.FULL, PARAMS, corrupt="drop_everything")
    with pytest.raises(ValueError, match="only applies"):
        build_symbol(SymbolKind.M2, PARAMS, corrupt="drop_m2")
    with pytest.raises(ValueError, match="positive diffusivity"):
        build_symbol(SymbolKind.THETA, PhysParams(nu=0.5, mu=0.5, eta=0.0))
