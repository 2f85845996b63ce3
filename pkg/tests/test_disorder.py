"""Tests for disorder laws, truncation and intermediate-disorder scaling constants."""

import math

import numpy as np
import pytest

from src.disorder.laws import TailLaw, sample_eta, tail_prob, truncated_moment
from src.disorder.scaling import (
    ScalingPlan,
    TruncationSpec,
    asymptotic_ledger,
    disorder_scale,
    gamma_N,
    kappa_a,
    kappa_a_shifted,
    kappa_N_a,
    truncate_eta,
)
from src.utils.errors import DomainError, ValidationError


@pytest.fixture
def pareto_one():
    return TailLaw(family="pareto", alpha=1.0)


@pytest.fixture
def centered():
    return TailLaw(family="centered_pareto", alpha=1.5)


def test_tail_prob_closed_forms(pareto_one, centered):
    """Tail probabilities match (x_m/z)^α and equal 1 below the support."""
    assert tail_prob(pareto_one, 2.0) == pytest.approx(0.5)
    assert tail_prob(pareto_one, 0.0) == 1.0
    assert centered.x_m == pytest.approx(1.0 / 3.0)
    assert tail_prob(centered, 1.0) == pytest.approx(0.192450, abs=1e-6)


def test_tail_prob_rejects_negative(pareto_one):
    with pytest.raises(DomainError):
        tail_prob(pareto_one, -1.0)


def test_sample_eta_examples(pareto_one, centered):
    """Inverse-transform samples hit the documented values."""
    assert sample_eta(pareto_one, 0.25) == pytest.approx(3.0)
    u = float(tail_prob(centered, 1.0))
    assert sample_eta(centered, u) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("family,alpha", [("pareto", 0.5), ("centered_pareto", 1.5), ("log_pareto", 1.3), ("log_pareto", 0.7)])
def test_inverse_transform_consistency(family, alpha):
    """tail_prob(1 + η(u)) = u on a grid of uniforms."""
    law = TailLaw(family=family, alpha=alpha)
    u = np.linspace(0.01, 0.99, 50)
    back = law.tail_prob(1.0 + sample_eta(law, u))
    np.testing.assert_allclose(back, u, rtol=1e-10)


def test_sample_eta_rejects_endpoints(centered):
    with pytest.raises(DomainError):
        sample_eta(centered, 0.0)
    with pytest.raises(DomainError):
        sample_eta(centered, 1.0)


def test_law_validation():
    """Family constraints are enforced at construction."""
    with pytest.raises(ValueError):
        TailLaw(family="centered_pareto", alpha=0.8)
    with pytest.raises(ValueError):
        TailLaw(family="pareto", alpha=1.5)
    with pytest.raises(ValueError):
        TailLaw(family="pareto", alpha=2.1)
    assert TailLaw(family="pareto", alpha=1.5, uncentered=True).x_m == 1.0


def test_centered_laws_have_unit_mean():
    for law in (TailLaw(family="centered_pareto", alpha=1.5), TailLaw(family="log_pareto", alpha=1.4)):
        assert law.power_moment(math.inf, 1) == pytest.approx(1.0, rel=1e-8)


def test_kappa_a_examples():
    assert kappa_a(0.5, 0.3) == 0.0
    assert kappa_a(1.0, 0.1) == pytest.approx(math.log(10.0))
    assert kappa_a(1.5, 0.04) == pytest.approx(15.0)
    assert kappa_a_shifted(1.0, 0.1) == pytest.approx(math.log(10.0))
    assert kappa_a_shifted(1.5, 1.0) == pytest.approx(0.0)


def test_kappa_N_a_example(centered):
    """N=1000, d=1, a=0.1 gives V_N ≈ 209.98 and κ_N^(a) ≈ 0.1242."""
    V_N = disorder_scale(centered, 1000, 1)
    assert V_N == pytest.approx(209.98, abs=0.01)
    assert kappa_N_a(centered, 0.1, V_N) == pytest.approx(0.1242, abs=5e-4)


def test_kappa_N_a_empty_band(centered):
    with pytest.raises(DomainError, match="empty truncation band"):
        kappa_N_a(centered, 0.001, 10.0)


def test_kappa_N_a_vanishes_below_one():
    law = TailLaw(family="pareto", alpha=0.5)
    assert kappa_N_a(law, 0.5, 100.0) == 0.0


def test_gamma_N_example(pareto_one):
    """γ_N = ln 500 - 1 + 1/500 for unit Pareto at N=100, d=1."""
    assert disorder_scale(pareto_one, 100, 1) == pytest.approx(500.0)
    assert gamma_N(pareto_one, 100, 1) == pytest.approx(5.21661, abs=1e-5)
    growth = gamma_N(pareto_one, 200, 1) - gamma_N(pareto_one, 100, 1)
    assert growth == pytest.approx(1.5 * math.log(2.0), abs=0.01)


def test_gamma_N_requires_alpha_one(centered):
    with pytest.raises(DomainError):
        gamma_N(centered, 100, 1)


def test_truncated_moment_examples(centered, pareto_one):
    second = truncated_moment(centered, 100.0, 2)
    assert second.exact == pytest.approx(4.5555, abs=1e-4)
    assert second.leading == pytest.approx(5.7735, abs=1e-4)
    assert truncated_moment(pareto_one, 500.0, 1).exact == pytest.approx(5.21661, abs=1e-5)
    assert abs(truncated_moment(centered, 1e12, 1).exact) < 1e-5


def test_truncated_moment_degenerate(centered):
    result = truncated_moment(centered, 0.2, 1)
    assert result.exact == 0.0
    assert result.degenerate


def test_truncate_eta_bands():
    spec = TruncationSpec(a=0.5, b=2.0, kappa_N_a=0.25, V_N=10.0)
    assert truncate_eta(9.0, spec) == 9.0            # 1+η = 2aV_N
    assert truncate_eta(39.0, spec) == 0.0           # 1+η = 2bV_N
    assert truncate_eta(1.0, spec) == -0.25          # below aV_N
    eta = np.array([0.3, 7.0, 100.0])
    np.testing.assert_array_equal(truncate_eta(eta, TruncationSpec.none()), eta)


def test_truncation_spec_requires_ordered_band():
    with pytest.raises(ValueError):
        TruncationSpec(a=1.0, b=0.5)


def test_scaling_plan_rejects_supercritical_alpha():
    law = TailLaw(family="centered_pareto", alpha=1.8)
    with pytest.raises(ValidationError) as exc:
        ScalingPlan.build(law, 16, 3, 1.0)
    assert exc.value.details["field"] == "law.alpha"


def test_scaling_plan_rejects_large_beta(centered):
    with pytest.raises(ValidationError) as exc:
        ScalingPlan.build(centered, 4, 1, 50.0)
    assert exc.value.details["field"] == "disorder.beta_hat"


def test_scaling_plan_constants(centered):
    plan = ScalingPlan.build(centered, 1000, 1, 1.0)
    assert 0.0 < plan.beta_N < 1.0
    assert plan.beta_N * plan.V_N == pytest.approx(0.5 * math.sqrt(1000.0))
    assert plan.normalization == 1.0


def test_ledger_product_converges(centered):
    """(1 - β_Nκ_N^(a))^N approaches e^{-β̂κ_a} within 1% at N = 2^16."""
    rows = asymptotic_ledger(centered, 1, 1.0, [2**16], 0.5)
    assert rows[0]["product_ratio"] == pytest.approx(1.0, abs=0.01)
    assert rows[0]["identity_residual"] == pytest.approx(0.0, abs=1e-9)


def test_ledger_second_moment_trend(centered):
    rows = asymptotic_ledger(centered, 1, 1.0, [2**8, 2**12, 2**16], 0.5)
    gaps = [abs(r["second_moment_ratio"] - 1.0) for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.05
