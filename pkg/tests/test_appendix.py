"""Tests for the ordered-time Dirichlet integrals and the stochastic comparison checks."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from src.appendix.comparison import (
    RampProduct,
    StepProduct,
    calibrated_constant,
    calibration_table,
    comparison_suite,
    decreasing_comparison_check,
    increasing_comparison_check,
    ramp_rhs,
    step_lhs,
    step_rhs,
)
from src.appendix.dirichlet import DirichletSpec, dirichlet_identity, gamma_formula
from src.disorder.laws import TailLaw
from src.utils.errors import DomainError
from src.utils.rng import StreamKey

CENTERED = TailLaw(family="centered_pareto", alpha=1.5)
UNCENTERED = TailLaw(family="pareto", alpha=1.5, uncentered=True)
LOG_LAW = TailLaw(family="log_pareto", alpha=1.4)


def test_dirichlet_arcsine():
    """k=1, ζ=(½, ½), t=1 gives π."""
    result = dirichlet_identity(DirichletSpec(k=1, zetas=[0.5, 0.5]))
    assert result.formula == pytest.approx(math.pi)
    assert result.numeric == pytest.approx(math.pi, rel=1e-10)


def test_dirichlet_linear():
    result = dirichlet_identity(DirichletSpec(k=1, zetas=[1.0, 2.0]))
    assert result.numeric == pytest.approx(0.5, rel=1e-10)


def test_dirichlet_time_scaling():
    """Flat exponents give the simplex volume t^k / k!."""
    spec = DirichletSpec(k=2, zetas=[1.0, 1.0, 1.0], t=2.0)
    assert gamma_formula(spec) == pytest.approx(2.0)
    assert dirichlet_identity(spec).numeric == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize("zetas", [[0.7, 1.3, 2.2, 0.9], [2.5, 0.6, 1.0, 1.1, 3.0]])
def test_dirichlet_quadrature_matches_formula(zetas):
    spec = DirichletSpec(k=len(zetas) - 1, zetas=zetas, t=1.7)
    assert dirichlet_identity(spec).relative_error < 1e-8


def test_dirichlet_monte_carlo():
    spec = DirichletSpec(k=2, zetas=[1.5, 2.0, 1.2])
    result = dirichlet_identity(spec, method="monte_carlo", samples=100_000, rng_key=StreamKey(0))
    assert result.method == "monte_carlo"
    assert abs(result.numeric - result.formula) <= 4 * result.std_error


def test_dirichlet_errors():
    with pytest.raises(ValueError):
        DirichletSpec(k=2, zetas=[1.0, 1.0])
    with pytest.raises(ValueError):
        DirichletSpec(k=1, zetas=[0.0, 1.0])
    with pytest.raises(DomainError):
        dirichlet_identity(DirichletSpec(k=1, zetas=[1.0, 1.0]), method="monte_carlo")
    with pytest.raises(DomainError):
        dirichlet_identity(DirichletSpec(k=7, zetas=[1.0] * 8), method="quadrature")


def test_zero_functional_passes():
    report = increasing_comparison_check(CENTERED, 1, RampProduct(caps=[0.0]), 10.0, 1000, StreamKey(0))
    assert report.lhs_exact == 0.0
    assert report.passed


def test_ramp_check_uncentered_pareto():
    report = increasing_comparison_check(UNCENTERED, 1, RampProduct(caps=[5.0]), 10.0, 20_000, StreamKey(1))
    assert report.passed
    assert abs(report.lhs - report.lhs_exact) <= 4 * report.lhs_se


def test_ramp_rhs_grows_with_B():
    for B in (10.0, 20.0, 50.0):
        assert ramp_rhs(CENTERED, 5.0, 2 * B) >= ramp_rhs(CENTERED, 5.0, B)


def test_ramp_arity_mismatch():
    with pytest.raises(DomainError):
        increasing_comparison_check(CENTERED, 2, RampProduct(caps=[1.0]), 10.0, 100, StreamKey(0))


def test_step_sides_closed_form():
    """E[X² 1{X < 100}] = 5.4402; the right side is x_m²/2 + ∫_{x_m}^100 u^{-1/2} x_m^{3/2} du = 3.6823."""
    assert step_lhs(CENTERED, 100.0) == pytest.approx(5.4402, abs=1e-4)
    assert step_rhs(CENTERED, 100.0) == pytest.approx(3.6823, abs=1e-4)
    assert step_rhs(CENTERED, 0.2) == pytest.approx(0.02)


@pytest.mark.parametrize("law", [CENTERED, LOG_LAW])
def test_both_sides_use_the_exact_slowly_varying_part(law):
    """ramp_rhs and step_rhs integrate u^α P(X > u), which matches the declared φ above x_m."""
    a, T, cap, B = law.alpha, 40.0, 5.0, 20.0
    step, _ = quad(lambda u: u ** (1 - a) * law.phi_exact(u), 0.0, T, points=[law.x_m], epsrel=1e-11, limit=200)
    ramp, _ = quad(lambda u: min(u, cap) * u ** (-1 - a) * law.phi_exact(u), 0.0, 2 * B, points=[law.x_m, cap], epsrel=1e-11, limit=200)
    assert step_rhs(law, T) == pytest.approx(step, rel=1e-8)
    assert ramp_rhs(law, cap, B) == pytest.approx(ramp, rel=1e-8)
    for u in (2.0, 7.5, 30.0):
        assert law.phi_exact(u) == pytest.approx(law.phi(u), rel=1e-12)


def test_decreasing_check_products():
    one = decreasing_comparison_check(CENTERED, 1, StepProduct(thresholds=[100.0]))
    two = decreasing_comparison_check(CENTERED, 2, StepProduct(thresholds=[100.0, 100.0]))
    assert one.passed and two.passed
    assert two.ratio == pytest.approx(one.ratio**2, rel=1e-12)


def test_decreasing_check_monte_carlo_side():
    report = decreasing_comparison_check(CENTERED, 1, StepProduct(thresholds=[10.0]), samples=50_000, rng_key=StreamKey(2))
    assert abs(report.lhs - report.lhs_exact) <= 4 * report.lhs_se


def test_decreasing_check_degenerate_threshold():
    report = decreasing_comparison_check(CENTERED, 1, StepProduct(thresholds=[0.2]))
    assert report.degenerate
    assert report.lhs_exact == 0.0


def test_calibration_table():
    rows = calibration_table([CENTERED, UNCENTERED])
    assert [row["family"] for row in rows] == ["centered_pareto", "pareto"]
    assert all(row["C_increasing"] > 0 and row["C_decreasing"] > 0 for row in rows)
    with pytest.raises(DomainError):
        calibrated_constant(CENTERED, "sideways")


def test_comparison_suite_passes():
    reports = comparison_suite(CENTERED, [1, 2, 3], 2, 2000, StreamKey(0))
    assert len(reports) == 12
    assert all(r.passed for r in reports)
    assert {r.check for r in reports} == {"increasing", "decreasing"}


@pytest.mark.slow
def test_dirichlet_random_specs_high_order():
    """Forty random specs with k ≤ 6 at quadrature precision."""
    rng = np.random.default_rng(0)
    for _ in range(40):
        k = int(rng.integers(1, 7))
        spec = DirichletSpec(k=k, zetas=list(np.round(rng.uniform(0.5, 3.0, k + 1), 3)), t=float(rng.uniform(0.5, 2.0)))
        assert dirichlet_identity(spec).relative_error < 1e-6
