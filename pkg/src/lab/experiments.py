"""Desk-scale experiments comparing the discrete polymer with its continuum limit."""

import logging
import math
from functools import partial
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from ..config import DEFAULT_WINDOW_L, KS_BOOTSTRAP_RESAMPLES
from ..continuum.cloud import sample_cloud
from ..continuum.pairing import pair_noise
from ..continuum.partition import continuum_partition, sample_continuum_path
from ..disorder.laws import TailLaw
from ..disorder.scaling import ScalingPlan, TruncationSpec, disorder_scale
from ..lattice.environment import sample_env_slab
from ..lattice.functionals import PathFunctional
from ..lattice.gibbs import sample_polymer_paths
from ..lattice.partition import partition_dp
from ..utils.errors import DomainError
from ..utils.parallel import replica_map
from ..utils.rng import Stream, StreamKey, generator
from .bumps import BumpProduct
from .distances import DistanceReport, empirical_distance
from .xi_field import cutoff_spec, psi_square_sum, variance_cap, xi_difference_pair, xi_discrete_pair

logger = logging.getLogger(__name__)


class MarginalSample(NamedTuple):
    """(⟨ξ^(a), ψ⟩, normalized partition function) from one disorder realization."""
    pairing: float
    partition: float
    side: str
    scale: float
    replica: int
    seed: int


# -- joint marginals ------------------------------------------------------------

def discrete_marginal(
    replica: int,
    plan: ScalingPlan,
    psi: BumpProduct,
    f: Optional[PathFunctional],
    a: float,
    key: StreamKey,
    window: Optional[float],
) -> MarginalSample:
    env = sample_env_slab(plan.law, plan.N, plan.d, key.for_replica(replica), materialize=False)
    pairing = xi_discrete_pair(env, psi, plan, a)
    z = partition_dp(env, plan.beta_N, plan.truncation(a), f, window).normalized(plan)
    return MarginalSample(pairing, z.value, "discrete", float(plan.N), replica, key.seed)


def continuum_marginal(
    replica: int,
    alpha: float,
    a: float,
    beta_hat: float,
    psi: BumpProduct,
    f: Optional[PathFunctional],
    L: float,
    d: int,
    key: StreamKey,
) -> MarginalSample:
    cloud = sample_cloud(alpha, a, L, d, key.for_replica(replica))
    pairing = pair_noise(cloud, psi, alpha, a)
    z = continuum_partition(cloud, beta_hat, f)
    return MarginalSample(pairing, z.value, "continuum", a, replica, key.seed)


def _compare(
    discrete: Sequence[MarginalSample],
    continuum: Sequence[MarginalSample],
    N: int,
    a: float,
    statistics: Sequence[str],
    rng: Optional[np.random.Generator],
) -> List[DistanceReport]:
    reports = []
    for component in ("pairing", "partition"):
        xs = np.array([getattr(s, component) for s in discrete])
        ys = np.array([getattr(s, component) for s in continuum])
        for stat in statistics:
            report = empirical_distance(xs, ys, stat, rng, KS_BOOTSTRAP_RESAMPLES)
            report.meta.update({"N": N, "a": a, "component": component})
            reports.append(report)
    return reports


def marginal_convergence_experiment(
    law: TailLaw,
    beta_hat: float,
    psi: BumpProduct,
    f: Optional[PathFunctional],
    N_grid: Sequence[int],
    a: float,
    replicas: int,
    rng_key: StreamKey,
    d: int = 1,
    L: float = DEFAULT_WINDOW_L,
    workers: Optional[int] = None,
    statistics: Sequence[str] = ("ks", "wasserstein1"),
    bootstrap: bool = True,
) -> List[DistanceReport]:
    """
    Distances between the discrete and continuum laws of (⟨ξ^(a), ψ⟩, Z^a(f)) along N_grid.

    The continuum reference sample is drawn once; each N gets fresh environments.
    Discrete partition functions use the DP window L·√(N/d), matching the cloud window.

    Raises:
        ValidationError: If α ≥ α_c(d) (the limit is degenerate) or β_N ∉ (0, 1)
    """
    if a <= 0:
        raise DomainError("the continuum reference needs a > 0", a=a)
    plans = [ScalingPlan.build(law, N, d, beta_hat) for N in N_grid]
    logger.info(f"converge: alpha={law.alpha}, d={d}, a={a}, N_grid={list(N_grid)}, replicas={replicas}")

    cont_fn = partial(
        continuum_marginal, alpha=law.alpha, a=a, beta_hat=beta_hat, psi=psi, f=f, L=L, d=d,
        key=rng_key.child(Stream.CLOUD),
    )
    continuum = replica_map(cont_fn, range(replicas), workers)
    rng = generator(rng_key.child(Stream.BOOTSTRAP)) if bootstrap else None

    reports: List[DistanceReport] = []
    for plan in plans:
        disc_fn = partial(
            discrete_marginal, plan=plan, psi=psi, f=f, a=a,
            key=rng_key.child(Stream.ENVIRONMENT), window=L,
        )
        discrete = replica_map(disc_fn, range(replicas), workers)
        reports.extend(_compare(discrete, continuum, plan.N, a, statistics, rng))
        logger.info(f"converge: N={plan.N} done")
    return reports


def joint_marginal_samples(
    law: TailLaw,
    beta_hat: float,
    psi: BumpProduct,
    f: Optional[PathFunctional],
    N: int,
    a: float,
    replicas: int,
    rng_key: StreamKey,
    d: int = 1,
    L: float = DEFAULT_WINDOW_L,
    workers: Optional[int] = None,
) -> List[MarginalSample]:
    """Raw discrete samples at one N, for the simulate-discrete command."""
    plan = ScalingPlan.build(law, N, d, beta_hat)
    fn = partial(discrete_marginal, plan=plan, psi=psi, f=f, a=a, key=rng_key.child(Stream.ENVIRONMENT), window=L)
    return replica_map(fn, range(replicas), workers)


# -- truncation error ------------------------------------------------------------

class TruncationPoint(NamedTuple):
    N: int
    a: float
    estimate: float
    std_error: float


class TruncationCurve(NamedTuple):
    points: List[TruncationPoint]
    sup_by_a: List[TruncationPoint]


def _truncation_replica(replica: int, plan: ScalingPlan, a_grid: Sequence[float], f, key: StreamKey, window) -> np.ndarray:
    env = sample_env_slab(plan.law, plan.N, plan.d, key.for_replica(replica))
    z0 = partition_dp(env, plan.beta_N, None, f, window).value
    out = np.empty(len(a_grid))
    for k, a in enumerate(a_grid):
        if a == 0:
            out[k] = 0.0
            continue
        za = partition_dp(env, plan.beta_N, plan.truncation(a), f, window).value
        out[k] = min(plan.normalization * abs(za - z0), 1.0)
    return out


def truncation_error_curve(
    law: TailLaw,
    beta_hat: float,
    d: int,
    N_grid: Sequence[int],
    a_grid: Sequence[float],
    replicas: int,
    rng_key: StreamKey,
    f: Optional[PathFunctional] = None,
    window: Optional[float] = None,
    workers: Optional[int] = None,
) -> TruncationCurve:
    """
    Estimates of E[(e^{-β̂γ_N 1{α=1}} |Z^{η,a} - Z^{η,0}|) ∧ 1] on every (N, a), plus the sup over N per a.

    All cutoffs of one replica share its slab.
    """
    if not N_grid or not a_grid:
        raise DomainError("N_grid and a_grid must be non-empty")
    if replicas < 2:
        raise DomainError("need at least 2 replicas", replicas=replicas)
    points: List[TruncationPoint] = []
    for N in N_grid:
        plan = ScalingPlan.build(law, N, d, beta_hat)
        fn = partial(_truncation_replica, plan=plan, a_grid=list(a_grid), f=f, key=rng_key.child(Stream.ENVIRONMENT), window=window)
        values = np.vstack(replica_map(fn, range(replicas), workers))
        means = values.mean(axis=0)
        ses = values.std(axis=0, ddof=1) / math.sqrt(replicas)
        points.extend(TruncationPoint(N, float(a), float(m), float(s)) for a, m, s in zip(a_grid, means, ses))
        logger.info(f"truncation curve: N={N} done")
    sup_by_a = []
    for a in a_grid:
        column = [p for p in points if p.a == float(a)]
        sup_by_a.append(max(column, key=lambda p: p.estimate))
    return TruncationCurve(points, sup_by_a)


# -- ξ truncation decay -------------------------------------------------------

class XiSlope(NamedTuple):
    slope: float
    intercept: float
    a_grid: List[float]
    variances: List[float]
    variance_ses: List[float]
    caps: List[float]
    within_cap: bool
    flagged: bool


def _xi_replica(replica: int, law: TailLaw, N: int, d: int, psi: BumpProduct, specs, V_N: float, key: StreamKey) -> np.ndarray:
    env = sample_env_slab(law, N, d, key.for_replica(replica), materialize=False)
    return np.array([xi_difference_pair(env, psi, V_N, spec) for spec in specs])


def xi_truncation_slope(
    law: TailLaw,
    d: int,
    N: int,
    psi: BumpProduct,
    a_grid: Sequence[float],
    replicas: int,
    rng_key: StreamKey,
    workers: Optional[int] = None,
) -> XiSlope:
    """
    Least-squares slope of log Var⟨ξ_N - ξ_N^(a), ψ⟩ against log a.

    Each variance is also compared with its closed form; ``within_cap`` allows
    three standard errors of the sample variance.
    """
    if not 0.0 < law.alpha < 2.0:
        raise DomainError("alpha must lie in (0, 2)", alpha=law.alpha)
    if len(a_grid) < 3:
        raise DomainError("need at least 3 cutoffs to fit a slope", count=len(a_grid))
    if any(a <= 0 for a in a_grid):
        raise DomainError("cutoffs must be positive", a_grid=list(a_grid))
    if replicas < 2:
        raise DomainError("need at least 2 replicas", replicas=replicas)
    V_N = disorder_scale(law, N, d)
    specs = [cutoff_spec(law, V_N, a) for a in a_grid]
    square_sum = psi_square_sum(psi, N, d)
    caps = [variance_cap(law, psi, N, d, spec, square_sum).cap for spec in specs]

    fn = partial(_xi_replica, law=law, N=N, d=d, psi=psi, specs=specs, V_N=V_N, key=rng_key.child(Stream.ENVIRONMENT))
    values = np.vstack(replica_map(fn, range(replicas), workers))
    variances = values.var(axis=0, ddof=1)
    centered_sq = (values - values.mean(axis=0)) ** 2
    var_ses = centered_sq.std(axis=0, ddof=1) / math.sqrt(replicas)
    within = bool(np.all(variances <= np.asarray(caps) + 3.0 * var_ses))

    if np.any(variances <= 0):
        logger.warning("xi truncation slope undefined: some variances vanish")
        return XiSlope(math.nan, math.nan, list(a_grid), variances.tolist(), var_ses.tolist(), caps, within, True)
    slope, intercept = np.polyfit(np.log(a_grid), np.log(variances), 1)
    logger.info(f"xi slope: alpha={law.alpha}, N={N}, slope={slope:.4f} (theory {2 - law.alpha:g})")
    return XiSlope(float(slope), float(intercept), list(a_grid), variances.tolist(), var_ses.tolist(), caps, within, False)


# -- path marginals -----------------------------------------------------------

def _discrete_position(replica: int, plan: ScalingPlan, a: float, t: float, key: StreamKey) -> float:
    env = sample_env_slab(plan.law, plan.N, plan.d, key.for_replica(replica))
    trunc = plan.truncation(a) if a > 0 else TruncationSpec.none()
    path = sample_polymer_paths(env, plan.beta_N, trunc, 1, key.for_replica(replica))
    m = t * plan.N
    lo = int(math.floor(m))
    frac = m - lo
    pos = path[0, lo, 0] if frac == 0 else (1 - frac) * path[0, lo, 0] + frac * path[0, lo + 1, 0]
    return float(pos * math.sqrt(plan.d / plan.N))


def _continuum_position(replica: int, alpha: float, a: float, beta_hat: float, t: float, L: float, d: int, key: StreamKey) -> float:
    cloud = sample_cloud(alpha, a, L, d, key.for_replica(replica))
    grid = np.array([0.0, t])
    return float(sample_continuum_path(cloud, beta_hat, grid, key.for_replica(replica))[0, -1, 0])


def path_marginal_experiment(
    law: TailLaw,
    beta_hat: float,
    N_grid: Sequence[int],
    d: int,
    t: float,
    a: float,
    replicas: int,
    rng_key: StreamKey,
    L: float = DEFAULT_WINDOW_L,
    workers: Optional[int] = None,
) -> List[DistanceReport]:
    """KS distance between the first coordinate of S^(N)_t under P^{η,a} and of B_t under Q^{ω,a}."""
    if not 0.0 < t <= 1.0:
        raise DomainError("t must lie in (0, 1]", t=t)
    if a <= 0:
        raise DomainError("the continuum reference needs a > 0", a=a)
    cont_fn = partial(_continuum_position, alpha=law.alpha, a=a, beta_hat=beta_hat, t=t, L=L, d=d, key=rng_key.child(Stream.CLOUD))
    continuum = np.array(replica_map(cont_fn, range(replicas), workers))
    rng = generator(rng_key.child(Stream.BOOTSTRAP))
    reports = []
    for N in N_grid:
        plan = ScalingPlan.build(law, N, d, beta_hat)
        fn = partial(_discrete_position, plan=plan, a=a, t=t, key=rng_key.child(Stream.WALK))
        discrete = np.array(replica_map(fn, range(replicas), workers))
        report = empirical_distance(discrete, continuum, "ks", rng)
        report.meta.update({"N": N, "a": a, "component": f"position_t={t:g}"})
        reports.append(report)
    return reports
