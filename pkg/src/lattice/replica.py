"""Second moment of the truncated partition function and the replica overlap identity.

For the band-truncated environment η^[a,b), E[Z²]/E[Z]² = E^{⊗2}[(1+r)^{L_N}]
where L_N counts the times 1..N at which two independent walks coincide and
r = β_N² Var(η^[a,b)) / E[1+β_N η^[a,b)]².
"""

import logging
import math
from functools import partial
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..disorder.laws import TailLaw, truncated_moment
from ..disorder.scaling import ScalingPlan, TruncationSpec
from ..utils.errors import DomainError
from ..utils.parallel import replica_map
from ..utils.rng import Stream, StreamKey, generator
from .environment import sample_env_slab
from .kernel import spread
from .partition import _directions, partition_dp

logger = logging.getLogger(__name__)


class BandMoments(NamedTuple):
    mean: float
    second: float

    @property
    def variance(self) -> float:
        return self.second - self.mean**2


class ReplicaMoment(NamedTuple):
    r: float
    direct: float
    direct_se: float
    overlap: float
    overlap_se: float
    exact_overlap: float


def band_moments(law: TailLaw, spec: TruncationSpec) -> BandMoments:
    """E[η^[a,b)] and E[(η^[a,b))²] in closed form."""
    if math.isinf(spec.b):
        raise DomainError("band moments need a finite upper cutoff b", b=spec.b)
    u_a, u_b = spec.a * spec.V_N, spec.b * spec.V_N
    p_below = law.power_moment(u_a, 0)

    def part(u: float, p: int) -> float:
        return truncated_moment(law, u, p).exact

    m1 = -spec.kappa_N_a * p_below + part(u_b, 1) - part(u_a, 1)
    m2 = spec.kappa_N_a**2 * p_below + part(u_b, 2) - part(u_a, 2)
    return BandMoments(m1, m2)


def overlap_parameter(law: TailLaw, plan: ScalingPlan, spec: TruncationSpec) -> Tuple[float, BandMoments]:
    """r_N^{a,b} = β_N² Var(η^[a,b)) / E[1+β_Nη^[a,b)]²."""
    moments = band_moments(law, spec)
    beta = plan.beta_N
    return beta**2 * moments.variance / (1.0 + beta * moments.mean) ** 2, moments


def exact_overlap_moment(r: float, N: int, d: int) -> float:
    """E^{⊗2}[(1+r)^{L_N}] by DP over the difference walk S¹ - S²."""
    v = np.ones((1,) * d)
    for _ in range(N):
        v = spread(spread(v, d), d)
        center = (v.shape[0] - 1) // 2
        v[(center,) * d] *= 1.0 + r
    return float(v.sum())


def _direct_replica(replica: int, law: TailLaw, plan: ScalingPlan, spec: TruncationSpec, key: StreamKey, mean_z: float) -> float:
    env = sample_env_slab(law, plan.N, plan.d, key.for_replica(replica))
    z = partition_dp(env, plan.beta_N, spec).value
    return (z / mean_z) ** 2


def replica_second_moment(
    law: TailLaw,
    plan: ScalingPlan,
    a: float,
    b: float,
    N: Optional[int],
    replicas: int,
    rng_key: StreamKey,
    workers: Optional[int] = None,
) -> ReplicaMoment:
    """
    Direct and overlap-formula estimates of E[Z²]/E[Z]² for the [a, b) band.

    Args:
        law: Disorder law
        plan: Scaling plan (fixes N, d, β_N, V_N)
        a: Lower cutoff
        b: Upper cutoff (finite)
        N: Must match plan.N when given
        replicas: Environments for the direct estimate and walk pairs for the overlap estimate
        rng_key: Base key; replica ids index environments
        workers: Process count for the environment sweep

    Returns:
        ReplicaMoment with both Monte-Carlo estimates, their SEs and the exact overlap value
    """
    if N is not None and N != plan.N:
        raise DomainError("N does not match the scaling plan", N=N, plan_N=plan.N)
    if replicas < 2:
        raise DomainError("need at least 2 replicas", replicas=replicas)
    spec = plan.truncation(a, b)
    r, moments = overlap_parameter(law, plan, spec)
    mean_z = (1.0 + plan.beta_N * moments.mean) ** plan.N
    logger.info(f"replica moment: N={plan.N}, r={r:.6g}, E[Z]={mean_z:.6g}")

    fn = partial(_direct_replica, law=law, plan=plan, spec=spec, key=rng_key.child(Stream.ENVIRONMENT), mean_z=mean_z)
    squares = np.asarray(replica_map(fn, range(replicas), workers))
    direct = float(squares.mean())
    direct_se = float(squares.std(ddof=1) / math.sqrt(replicas))

    gen = generator(rng_key.child(Stream.WALK))
    dirs = _directions(plan.d)
    weights = np.empty(replicas)
    chunk = 1 << 14
    for start in range(0, replicas, chunk):
        size = min(chunk, replicas - start)
        s1 = np.cumsum(dirs[gen.integers(0, 2 * plan.d, size=(size, plan.N))], axis=1)
        s2 = np.cumsum(dirs[gen.integers(0, 2 * plan.d, size=(size, plan.N))], axis=1)
        coincide = np.all(s1 == s2, axis=2).sum(axis=1)
        weights[start:start + size] = (1.0 + r) ** coincide
    overlap = float(weights.mean())
    overlap_se = float(weights.std(ddof=1) / math.sqrt(replicas))

    return ReplicaMoment(r, direct, direct_se, overlap, overlap_se, exact_overlap_moment(r, plan.N, plan.d))
