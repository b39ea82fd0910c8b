"""
Unit tests for the multiplier inequality certification
"""
import numpy as np
import pytest

from src.multipliers.certification import (
    certify_linear_inequalities,
    certify_nonlinear_inequalities,
    default_xi_extent,
    scan_interval,
)


def test_scan_finds_dip_between_initial_nodes(settings):
    """Test refinement uncovers a negative dip that no initial node sees"""

    def margin(x):
        return (x - 0.3) ** 2 - 1e-8, np.ones_like(x)

    result = scan_interval(margin, 0.0, 1.0, depth=14, settings=settings, name="dip")
    assert not result.passed
    assert result.raw_min_margin < 0.0
    assert result.argmin_xi == pytest.approx(0.3, abs=1e-4)


def test_scan_passes_positive_margin(settings):
    """Test a strictly positive margin passes without tight cells"""

    def margin(x):
        return 1.0 + x**2, 1.0 + x**2

    result = scan_interval(margin, -2.0, 2.0, depth=6, settings=settings, name="positive")
    assert result.passed
    assert result.tight_cells == 0
    assert result.min_margin > 1.0
    assert not result.within_roundoff


def test_scan_marks_passes_inside_the_rounding_allowance(settings, caplog):
    """Test a raw margin just below zero passes but is flagged as roundoff"""

    def margin(x):
        return np.full_like(x, -1e-12), np.ones_like(x)

    result = scan_interval(margin, 0.0, 1.0, depth=4, settings=settings, name="flat")
    assert result.passed
    assert result.raw_min_margin == -1e-12
    assert result.min_margin >= 0.0
    assert result.within_roundoff
    assert "certified within rtol" in caplog.text


def test_scan_rejects_empty_interval(settings):
    """Test an empty interval is refused"""
    with pytest.raises(ValueError, match="Empty scan interval"):
        scan_interval(lambda x: (x, x), 1.0, 1.0, depth=2, settings=settings)


def test_linear_certification_passes_unit_viscosity(settings):
    """Test the M' inequalities and the theta inequality hold at nu = 1, k = 1"""
    report = certify_linear_inequalities(1.0, [1], settings=settings)
    assert report.passed
    margins = report.min_margins()
    assert set(margins) == {"linear_dissipation", "linear_shear", "theta_dissipation"}
    assert all(value > 0.0 for value in margins.values())
    assert report.tail_notes


def test_linear_certification_is_symmetric_in_k(settings):
    """Test margins for k and -k coincide"""
    plus = certify_linear_inequalities(0.5, [2], depth=6, settings=settings).min_margins()
    minus = certify_linear_inequalities(0.5, [-2], depth=6, settings=settings).min_margins()
    for name, value in plus.items():
        assert minus[name] == pytest.approx(value, rel=1e-9, abs=1e-12)


def test_linear_certification_marks_zero_mode(settings):
    """Test k = 0 is reported as not applicable"""
    report = certify_linear_inequalities(1.0, [0], settings=settings)
    assert report.passed
    assert not report.scans[0].applicable
    assert "not applicable" in report.scans[0].note


def test_linear_certification_requires_wide_range(settings):
    """Test a scan interval narrower than the required one is refused"""
    with pytest.raises(ValueError, match="does not cover"):
        certify_linear_inequalities(1.0, [1], xi_range=(-5.0, 5.0), settings=settings)
    extent = default_xi_extent(1.0, 1)
    report = certify_linear_inequalities(1.0, [1], xi_range=(-extent - 1.0, extent + 1.0), depth=4, settings=settings)
    assert report.scans[0].xi_range == (-extent - 1.0, extent + 1.0)


def test_nonlinear_certification_passes_half_viscosity(settings):
    """Test the composite-multiplier and lemma inequalities over k = +-1..+-8"""
    kset = [k for k in range(-8, 9) if k != 0]
    report = certify_nonlinear_inequalities(0.5, kset, depth=8, settings=settings)
    assert report.passed, report.failures()
    margins = report.min_margins()
    assert margins["nonlinear_dissipation"] > 0.0
    assert margins["nonlinear_shear"] > 0.0
    assert margins["lemma_middle"] >= 0.0
    assert margins["lemma_tail"] >= 0.0


def test_refinement_never_flips_a_pass(settings):
    """Test deeper refinement keeps a passing report passing with a no larger minimum"""
    shallow = certify_nonlinear_inequalities(1.0, [1, 3], depth=3, settings=settings)
    deep = certify_nonlinear_inequalities(1.0, [1, 3], depth=10, settings=settings)
    assert shallow.passed and deep.passed
    for name, value in deep.min_margins().items():
        assert value <= shallow.min_margins()[name] + 1e-12


def test_measured_constants_stay_bounded(settings):
    """Test nu^4 max M and nu^3 |k| max phi_k' stay bounded across a viscosity sweep"""
    for nu in (1.0, 0.5, 0.1, 0.05):
        report = certify_nonlinear_inequalities(nu, [1, 2, 3], depth=2, settings=settings)
        constants = report.measured_constants
        assert 0.0 < constants["nu4_max_M"] < 3000.0
        assert 0.0 < constants["nu3_k_max_phi_k_slope"] < 3000.0


def test_dropping_m2_fails_shear_inequality(settings):
    """Test the negative control without M2 is rejected"""
    report = certify_nonlinear_inequalities(0.1, [1], corrupt="drop_m2", depth=6, settings=settings)
    assert not report.passed
    assert (1, "nonlinear_shear") in report.failures()
    assert report.corrupt == "drop_m2"
