import math

import numpy as np
import pytest

from pydbicc.errors import DegenerateInputError, InsufficientDataError, ParameterError
from pydbicc.spearman_brown import (build_sb_curve, classical_sb, estimate_beta, fit_loglog,
                                    inverse_snr, snr, snr_from_msd)


def test_snr_values():
    assert snr(0.0) == 0.0
    assert snr(0.5) == 1.0
    assert snr(0.8) == pytest.approx(4.0)
    with pytest.raises(ParameterError):
        snr(1.0)
    with pytest.raises(ParameterError):
        snr(-0.1)


@pytest.mark.parametrize('rho', [0.0, 0.1, 0.37, 0.5, 0.99])
def test_inverse_snr_round_trip(rho):
    assert inverse_snr(snr(rho)) == pytest.approx(rho, abs = 1e-12)


def test_snr_is_increasing():
    values = [snr(rho) for rho in np.linspace(0, 0.99, 50)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_snr_from_msd():
    assert snr_from_msd(10.0, 4.0) == pytest.approx(1.5)
    assert snr_from_msd(10.0, 4.0) == pytest.approx(snr(1 - 4.0 / 10.0))
    with pytest.raises(ParameterError):
        snr_from_msd(1.0, 0.0)


def test_classical_sb():
    assert classical_sb(0.3, 1) == pytest.approx(0.3)
    assert classical_sb(0.5, 3) == pytest.approx(0.75)
    assert classical_sb(1.0, 7) == 1.0
    with pytest.raises(ParameterError):
        classical_sb(0.5, 2.5)


@pytest.mark.parametrize('rho1', [0.1, 0.4, 0.8])
def test_classical_sb_multiplies_snr(rho1):
    previous = rho1
    for m in range(2, 10):
        rho_m = classical_sb(rho1, m)
        assert rho_m > previous
        assert snr(rho_m) == pytest.approx(m * snr(rho1), rel = 1e-12)
        previous = rho_m


def test_fit_exact_line():
    fit = fit_loglog([(x, 2 + x) for x in (0.0, 1.0, 2.0, 3.5)])
    assert fit.slope == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(2.0)
    assert fit.slope_se == pytest.approx(0.0, abs = 1e-12)
    assert not fit.degenerate


def test_fit_two_points_is_degenerate():
    fit = fit_loglog([(0.0, 1.0), (2.0, 5.0)])
    assert fit.slope == pytest.approx(2.0)
    assert fit.degenerate
    assert fit.slope_se == 0.0 and fit.intercept_se == 0.0


def test_fit_errors():
    with pytest.raises(DegenerateInputError):
        fit_loglog([(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)])
    with pytest.raises(InsufficientDataError):
        fit_loglog([(1.0, 0.0)])


def test_fit_matches_normal_equations():
    rng = np.random.default_rng(4)
    x = rng.uniform(0, 5, 12)
    y = 0.7 * x - 1 + rng.standard_normal(12)
    fit = fit_loglog(zip(x, y))
    design = np.column_stack([np.ones_like(x), x])
    coef = np.linalg.solve(design.T @ design, design.T @ y)
    residuals = y - design @ coef
    covariance = residuals @ residuals / (len(x) - 2) * np.linalg.inv(design.T @ design)
    assert fit.intercept == pytest.approx(coef[0])
    assert fit.slope == pytest.approx(coef[1])
    assert fit.intercept_se == pytest.approx(math.sqrt(covariance[0, 0]))
    assert fit.slope_se == pytest.approx(math.sqrt(covariance[1, 1]))


def test_exact_covariance_curve_has_unit_slope():
    k = 7.0
    curve = build_sb_curve([(m, (m - 1) / (m - 1 + k)) for m in (25, 34, 45, 61, 81)])
    assert curve.offset == 1
    assert curve.fit.slope == pytest.approx(1.0, abs = 1e-9)
    assert curve.fit.intercept == pytest.approx(-math.log(k), abs = 1e-9)
    assert curve.fit.slope_se == pytest.approx(0.0, abs = 1e-9)
    assert list(curve.xs) == sorted(curve.xs)


def test_estimate_beta_recovers_exponent():
    beta, k = 8 / 9, 3.0
    estimates = [(m, m ** beta / (m ** beta + k)) for m in (10, 20, 40, 80, 160)]
    assert estimate_beta(estimates) == pytest.approx(beta, abs = 1e-9)


def test_points_outside_unit_interval_are_excluded():
    estimates = [(10, -0.1), (20, 0.3), (40, 0.5), (80, 0.7), (160, 1.0)]
    curve = build_sb_curve(estimates)
    assert [point.m for point in curve.points] == [20, 40, 80]
    assert curve.excluded == ((10, -0.1), (160, 1.0))


def test_curve_errors():
    with pytest.raises(InsufficientDataError):
        build_sb_curve([(10, 0.2), (20, 0.4), (40, -0.5)])
    with pytest.raises(ParameterError):
        build_sb_curve([(1, 0.2), (20, 0.4), (40, 0.5)], offset = 1)
    with pytest.raises(ParameterError):
        build_sb_curve([(10, 0.2), (10, 0.3), (40, 0.5)])
    with pytest.raises(ParameterError):
        build_sb_curve([(10, 0.2), (20, 0.3), (40, 0.5)], offset = 2)
