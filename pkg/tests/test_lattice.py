"""Tests for the discrete polymer: slabs, kernels, partition functions and chaos expansion."""

import math

import numpy as np
import pytest

from src.config import ErrorCode
from src.disorder.laws import TailLaw
from src.disorder.scaling import ScalingPlan, TruncationSpec
from src.lattice.chaos import RatioCheck, chaos_expansion, exceedance_sites, ratio_check, require_nondegenerate
from src.lattice.environment import EnvSlab, sample_env_slab
from src.lattice.functionals import CylinderFactor, GaussianFactor, PathFunctional
from src.lattice.gibbs import WalkPath, rescale_path, sample_polymer_path, sample_polymer_paths
from src.lattice.kernel import walk_kernel
from src.lattice.partition import partition_bruteforce, partition_dp, partition_mc, point_to_point_partition
from src.lattice.replica import exact_overlap_moment, replica_second_moment
from src.lattice.storage import load_slab, save_slab
from src.utils.errors import DegeneracyError, DomainError, PolymerLabError, ResourceGuardError, UnsupportedFunctionalError
from src.utils.rng import Stream, StreamKey, uniform_at, uniforms

LAW = TailLaw(family="centered_pareto", alpha=1.5)


def gaussian_cylinder(*times):
    return PathFunctional.cylinder([CylinderFactor(t, GaussianFactor(0.0, 1.0), 1.0) for t in times])


def test_slab_site_counts():
    """N=1 has the two sites (1, ±1); N=2 adds (2, 0) and (2, ±2)."""
    assert sample_env_slab(LAW, 1, 1, StreamKey(0)).site_count() == 2
    assert sample_env_slab(LAW, 2, 1, StreamKey(0)).site_count() == 5


def test_slab_is_deterministic_and_lazy_matches_materialized():
    a = sample_env_slab(LAW, 6, 2, StreamKey(3))
    b = sample_env_slab(LAW, 6, 2, StreamKey(3), materialize=False)
    for n in range(1, 7):
        np.testing.assert_array_equal(a.layer(n), b.layer(n))
        np.testing.assert_array_equal(a.layer(n, 2), b.layer(n, 2))
    assert a.site_value(4, (2, 0)) == b.site_value(4, (2, 0))


def test_random_access_matches_bulk_draws():
    key = StreamKey(11, replica=2)
    bulk = uniforms(key, 0, 40)
    for i in (0, 1, 3, 4, 17, 39):
        assert uniform_at(key, i) == bulk[i]
    np.testing.assert_array_equal(uniforms(key, 5, 10), bulk[5:15])


def test_slab_rejects_unreachable_site():
    slab = EnvSlab.zeros(3, 1)
    with pytest.raises(DomainError):
        slab.site_value(2, (1,))


def test_high_dimension_guard():
    with pytest.raises(ResourceGuardError):
        sample_env_slab(LAW, 1000, 3, StreamKey(0))


def test_walk_kernel_examples():
    assert walk_kernel(1, (1,), 1) == pytest.approx(0.5)
    assert walk_kernel(2, (0,), 1) == pytest.approx(0.5)
    assert walk_kernel(2, (0, 0), 2) == pytest.approx(0.25)
    assert walk_kernel(3, (0,), 1) == 0.0
    assert walk_kernel(3, (1, 1, 1), 3) == pytest.approx(6 / 216)


def test_partition_of_zero_environment():
    env = EnvSlab.zeros(5, 2)
    assert partition_dp(env, 0.5).value == pytest.approx(1.0)


def test_partition_one_step_closed_form():
    env = EnvSlab.from_values(1, 1, {(1, (1,)): 2.0, (1, (-1,)): -0.5})
    assert partition_dp(env, 0.4).value == pytest.approx(1.0 + 0.4 * (2.0 - 0.5) / 2.0)


@pytest.mark.parametrize("d,N_max", [(1, 10), (2, 4)])
def test_dp_matches_bruteforce(d, N_max):
    """Forward DP and path enumeration agree to 1e-12 relative."""
    trunc = TruncationSpec(a=0.5, b=6.0, kappa_N_a=0.1, V_N=2.0)
    functionals = [None, gaussian_cylinder(0.5), PathFunctional.support_cutoff(0.5), gaussian_cylinder(0.3, 1.0)]
    for seed in range(12):
        N = 1 + seed % N_max
        env = sample_env_slab(LAW, N, d, StreamKey(seed))
        for trunc_spec in (None, trunc):
            for f in functionals:
                dp = partition_dp(env, 0.3, trunc_spec, f).value
                brute = partition_bruteforce(env, 0.3, trunc_spec, f).value
                assert dp == pytest.approx(brute, rel=1e-12, abs=1e-14)


def test_dp_linearity():
    env = sample_env_slab(LAW, 8, 1, StreamKey(11))
    f1, f2 = gaussian_cylinder(0.25), gaussian_cylinder(0.75)
    combined = PathFunctional.combination([(2.0, f1), (-0.5, f2)])
    expected = 2.0 * partition_dp(env, 0.3, None, f1).value - 0.5 * partition_dp(env, 0.3, None, f2).value
    assert partition_dp(env, 0.3, None, combined).value == pytest.approx(expected, rel=1e-12)


def test_dp_rejects_joint_cylinder():
    env = EnvSlab.zeros(4, 1)
    f = PathFunctional.joint_cylinder([0.25, 0.75], lambda pts: np.ones(pts.shape[0]), 1.0)
    with pytest.raises(UnsupportedFunctionalError):
        partition_dp(env, 0.3, None, f)
    assert partition_bruteforce(env, 0.3, None, f).value == pytest.approx(1.0)


def test_dp_rejects_beta_outside_unit_interval():
    with pytest.raises(DomainError):
        partition_dp(EnvSlab.zeros(2, 1), 1.0)


def test_upper_cutoff_lowers_partition():
    """For f ≥ 0 the [a, b) partition function never exceeds the [a, ∞) one."""
    plan = ScalingPlan.build(LAW, 16, 1, 1.0)
    for seed in range(10):
        env = sample_env_slab(LAW, 16, 1, StreamKey(seed))
        lower = partition_dp(env, plan.beta_N, plan.truncation(0.3, 1.0)).value
        upper = partition_dp(env, plan.beta_N, plan.truncation(0.3)).value
        assert lower <= upper * (1 + 1e-12)


def test_normalization_applies_once():
    plan = ScalingPlan.build(TailLaw(family="pareto", alpha=1.0), 16, 1, 0.5)
    env = sample_env_slab(plan.law, 16, 1, StreamKey(0))
    result = partition_dp(env, plan.beta_N).normalized(plan)
    assert result.normalization == pytest.approx(math.exp(-0.5 * plan.gamma_N))
    with pytest.raises(DomainError):
        result.normalized(plan)


def test_partition_mc_on_zero_environment():
    estimate = partition_mc(EnvSlab.zeros(6, 1), 0.5, None, None, 100, StreamKey(0))
    assert estimate.estimate == pytest.approx(1.0)
    assert estimate.std_error == pytest.approx(0.0)


def test_partition_mc_matches_bruteforce():
    env = sample_env_slab(LAW, 8, 1, StreamKey(5))
    exact = partition_bruteforce(env, 0.2).value
    estimate = partition_mc(env, 0.2, None, None, 20000, StreamKey(9))
    assert abs(estimate.estimate - exact) <= 4 * estimate.std_error + 1e-12


def test_point_to_point_examples():
    env = EnvSlab.zeros(4, 1)
    assert point_to_point_partition(env, 0.5, (0, (0,)), (2, (0,))).value == pytest.approx(0.5)
    assert point_to_point_partition(env, 0.5, (2, (0,)), (2, (0,))).value == pytest.approx(1.0)
    with pytest.raises(DomainError):
        point_to_point_partition(env, 0.5, (0, (0,)), (3, (0,)))


def test_point_to_point_sums_to_point_to_line():
    env = sample_env_slab(LAW, 6, 1, StreamKey(2))
    total = sum(point_to_point_partition(env, 0.3, (0, (0,)), (6, (x,))).value for x in range(-6, 7, 2))
    assert total == pytest.approx(partition_dp(env, 0.3).value, rel=1e-12)


def test_chaos_expansion_without_high_sites():
    env = EnvSlab.zeros(6, 1)
    assert chaos_expansion(env, 0.5, 2.0, math.inf) == pytest.approx(1.0)


def test_chaos_expansion_single_site():
    env = EnvSlab.from_values(6, 1, {(4, (2,)): 3.0})
    expected = 1.0 + 0.5 * walk_kernel(4, (2,), 1) * 3.0
    assert chaos_expansion(env, 0.5, 2.0, math.inf) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("f", [None, PathFunctional.support_cutoff(0.5), gaussian_cylinder(0.5)])
def test_chaos_expansion_is_an_identity(f):
    """Z̄ equals the full partition function of the slab that keeps η only on Ω."""
    rng = np.random.default_rng(0)
    for _ in range(10):
        N = int(rng.integers(3, 9))
        sites = {}
        for n in range(1, N + 1):
            for x in range(-n, n + 1, 2):
                if rng.random() < 0.3:
                    sites[(n, (x,))] = float(rng.uniform(2.0, 6.0))
        env = EnvSlab.from_values(N, 1, sites)
        expansion = chaos_expansion(env, 0.3, 2.0, math.inf, f)
        brute = partition_bruteforce(env, 0.3, None, f).value
        assert expansion == pytest.approx(brute, rel=1e-10)


def test_exceedance_sites_respect_band():
    env = EnvSlab.from_values(4, 1, {(1, (1,)): 1.0, (2, (0,)): 5.0, (3, (1,)): 20.0})
    sites = exceedance_sites(env, 3.0, 10.0)
    assert sites.size == 1
    assert sites.n.tolist() == [2]


def test_ratio_check_is_exact_below_alpha_one():
    law = TailLaw(family="pareto", alpha=0.5)
    plan = ScalingPlan.build(law, 8, 1, 1.0)
    env = sample_env_slab(law, 8, 1, StreamKey(4))
    check = ratio_check(env, plan, 0.2)
    assert check.target == 1.0
    assert check.lhs_ratio == pytest.approx(1.0, rel=1e-10)
    assert not check.degenerate
    assert require_nondegenerate(check) is check


def test_degenerate_ratio_raises():
    with pytest.raises(DegeneracyError) as exc:
        require_nondegenerate(RatioCheck(float("nan"), 1.0, degenerate=True))
    assert exc.value.code == ErrorCode.DEGENERATE


def test_sampled_paths_on_zero_environment_are_simple_walks():
    paths = sample_polymer_paths(EnvSlab.zeros(10, 1), 0.5, None, 4000, StreamKey(1))
    steps = np.diff(paths[:, :, 0], axis=1)
    assert set(np.unique(steps).tolist()) == {-1, 1}
    assert abs(steps.mean()) < 4 * 1.0 / math.sqrt(steps.size)


def test_sampled_paths_follow_gibbs_weights():
    """N=3: empirical path frequencies match the enumerated Gibbs weights within 4 SE."""
    env = sample_env_slab(LAW, 3, 1, StreamKey(8))
    beta, count = 0.5, 20000
    paths = sample_polymer_paths(env, beta, None, count, StreamKey(2))
    z = partition_bruteforce(env, beta).value
    for steps in np.ndindex(2, 2, 2):
        moves = np.where(np.array(steps) == 0, 1, -1)
        pos = np.concatenate([[0], np.cumsum(moves)])
        weight = np.prod([1.0 + beta * env.site_value(n, (int(pos[n]),)) for n in range(1, 4)]) / 8.0
        p = weight / z
        freq = np.mean(np.all(paths[:, :, 0] == pos[None, :], axis=1))
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / count) + 1e-12


def test_sampling_is_deterministic():
    env = sample_env_slab(LAW, 12, 2, StreamKey(0))
    a = sample_polymer_path(env, 0.3, None, StreamKey(5)).positions
    b = sample_polymer_path(env, 0.3, None, StreamKey(5)).positions
    np.testing.assert_array_equal(a, b)


def test_rescale_path_interpolates():
    path = WalkPath(np.array([[0], [1], [2], [1], [0]]))
    rescaled = rescale_path(path, 4, 1)
    assert rescaled(0.0)[0] == 0.0
    assert rescaled(0.5)[0] == pytest.approx(2.0 * math.sqrt(1 / 4))
    assert rescaled(0.625)[0] == pytest.approx(1.5 * math.sqrt(1 / 4))


def test_exact_overlap_moment_one_step():
    assert exact_overlap_moment(0.3, 1, 1) == pytest.approx(1.15)
    assert exact_overlap_moment(0.0, 10, 2) == pytest.approx(1.0)


def test_replica_second_moment_agreement():
    plan = ScalingPlan.build(LAW, 16, 1, 1.0)
    result = replica_second_moment(LAW, plan, 0.1, 4.0, 16, 2000, StreamKey(3))
    assert result.overlap == pytest.approx(result.exact_overlap, abs=4 * result.overlap_se + 1e-12)
    combined = math.hypot(result.direct_se, result.overlap_se)
    assert abs(result.direct - result.exact_overlap) <= 4 * combined + 1e-12


def test_replica_second_moment_needs_finite_band():
    plan = ScalingPlan.build(LAW, 8, 1, 1.0)
    with pytest.raises(DomainError):
        replica_second_moment(LAW, plan, 0.1, math.inf, None, 10, StreamKey(0))


def test_slab_storage(tmp_path):
    env = sample_env_slab(LAW, 5, 2, StreamKey(6))
    loaded = load_slab(save_slab(env, tmp_path / "slab.bin"))
    assert loaded.law == LAW
    assert partition_dp(loaded, 0.3).value == pytest.approx(partition_dp(env, 0.3).value, rel=1e-15)


def test_slab_storage_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTASLAB" + bytes(16))
    with pytest.raises(PolymerLabError) as exc:
        load_slab(path)
    assert exc.value.code == ErrorCode.IO_ERROR


def resampled_mean(env, plan, a, f, resamples, seed):
    """Mean and SE of Z over redraws of the sites below aV_N, holding the rest."""
    values = np.array([
        partition_dp(env.with_resampled_below(a * plan.V_N, StreamKey(seed, replica=i, stream=Stream.RESAMPLE)), plan.beta_N, f=f).value
        for i in range(resamples)
    ])
    return values.mean(), values.std(ddof=1) / math.sqrt(resamples)


@pytest.mark.parametrize("law,f", [
    (LAW, gaussian_cylinder(0.5)),
    (TailLaw(family="pareto", alpha=1.0), None),
    (TailLaw(family="pareto", alpha=1.0), PathFunctional.support_cutoff(3.0)),
])
def test_truncated_partition_is_the_mean_over_resampled_small_sites(law, f):
    """Z is multilinear in the sites, so replacing sub-threshold η by -κ equals averaging over their redraws."""
    plan = ScalingPlan.build(law, 8, 1, 0.5)
    for slab in range(2):
        env = sample_env_slab(law, 8, 1, StreamKey(20, slab))
        mean, se = resampled_mean(env, plan, 1.0, f, 2000, 30 + slab)
        expected = partition_dp(env, plan.beta_N, plan.truncation(1.0), f=f).value
        assert abs(mean - expected) <= 4 * se + 1e-12


@pytest.mark.slow
def test_martingale_mean_is_one():
    """Mean of Z over 10^5 environments at N=64 equals 1 within 3 SE."""
    plan = ScalingPlan.build(LAW, 64, 1, 1.0)
    values = np.array([partition_dp(sample_env_slab(LAW, 64, 1, StreamKey(7, r)), plan.beta_N).value for r in range(100_000)])
    assert abs(values.mean() - 1.0) <= 3 * values.std(ddof=1) / math.sqrt(values.size)


@pytest.mark.slow
@pytest.mark.parametrize("law,f", [(LAW, gaussian_cylinder(0.5)), (TailLaw(family="pareto", alpha=1.0), None)])
def test_resampling_mean_high_precision(law, f):
    plan = ScalingPlan.build(law, 8, 1, 0.5)
    for slab in range(3):
        env = sample_env_slab(law, 8, 1, StreamKey(21, slab))
        mean, se = resampled_mean(env, plan, 1.0, f, 10_000, 40 + slab)
        expected = partition_dp(env, plan.beta_N, plan.truncation(1.0), f=f).value
        assert abs(mean - expected) <= 4 * se + 1e-12


@pytest.mark.slow
def test_ratio_concentrates_at_large_N():
    """At N=2^14, α=1.5, a=0.5, at least 95% of 200 environments land within 2% of e^{-β̂κ_a}."""
    N = 2**14
    plan = ScalingPlan.build(LAW, N, 1, 1.0)
    f = PathFunctional.support_cutoff(3.0)
    checks = [ratio_check(sample_env_slab(LAW, N, 1, StreamKey(8, r)), plan, 0.5, f=f) for r in range(200)]
    close = [c for c in checks if not c.degenerate and abs(c.lhs_ratio / c.target - 1.0) <= 0.02]
    assert len(close) >= 190


@pytest.mark.slow
def test_replica_identity_at_scale():
    plan = ScalingPlan.build(LAW, 64, 1, 1.0)
    result = replica_second_moment(LAW, plan, 0.1, 4.0, 64, 100_000, StreamKey(9))
    combined = math.hypot(result.direct_se, result.overlap_se)
    assert abs(result.direct - result.overlap) <= 3 * combined
