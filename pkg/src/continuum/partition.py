"""Continuum partition functions 𝒵^{ω,a}_β̂(f) over finite chains of cloud points.

    𝒵^{ω,a}(f) = e^{-β̂κ_a} Σ_{σ ⊂ ω} β̂^{|σ|} ϱ(t_σ, x_σ) E_Q[f | B = x_σ at t_σ] Π_{i∈σ} υ_i

The sum over subsets is evaluated by a forward chain recursion in O(M²).
"""

import itertools
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from ..config import MAX_SUBSET_POINTS
from ..disorder.scaling import kappa_a, kappa_a_shifted
from ..lattice.functionals import PathFunctional
from ..utils.errors import DomainError, ResourceGuardError, UnsupportedFunctionalError
from ..utils.rng import Stream, StreamKey, generator
from .bridge import bridge_paths, segment_expectation
from .cloud import PoissonCloud
from .kernels import gaussian_kernel, gaussian_kernel_matrix, multistep_kernel

logger = logging.getLogger(__name__)

CENTERINGS = ("standard", "shifted")


class ContinuumPartition:
    """Value of 𝒵^{ω,a}_β̂(f) with the prefactor it includes."""

    def __init__(
        self,
        value: float,
        a: float,
        beta_hat: float,
        prefactor: float,
        window_exit_bound: float = 0.0,
        std_error: float = 0.0,
        method: str = "recursion",
        centering: str = "standard",
    ):
        self.value = float(value)
        self.a = a
        self.beta_hat = beta_hat
        self.prefactor = prefactor
        self.window_exit_bound = window_exit_bound
        self.std_error = std_error
        self.method = method
        self.centering = centering

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "a": self.a,
            "beta_hat": self.beta_hat,
            "prefactor": self.prefactor,
            "window_exit_bound": self.window_exit_bound,
            "std_error": self.std_error,
            "method": self.method,
            "centering": self.centering,
        }

    def __repr__(self) -> str:
        return f"ContinuumPartition(value={self.value!r}, a={self.a!r}, method={self.method!r})"


def centering_constant(alpha: float, a: float, centering: str = "standard") -> float:
    if centering not in CENTERINGS:
        raise DomainError("unknown centering", centering=centering, allowed=list(CENTERINGS))
    return kappa_a(alpha, a) if centering == "standard" else kappa_a_shifted(alpha, a)


def window_exit_bound(cloud: PoissonCloud) -> float:
    """Upper bound 4d·Φ̄(R) on P(sup_{t≤1} |B_t|_∞ ≥ R), R the distance to the window face."""
    radius = cloud.exit_radius()
    if radius <= 0:
        return 1.0
    return min(1.0, 4.0 * cloud.d * float(norm.sf(radius)))


# -- bridge weights for each kind of chain link --------------------------------

class _Weights:
    """Bridge-expectation factors c_j, c_ij, tail_j and E_Q[f] for a cylinder functional."""

    def __init__(self, cloud: PoissonCloud, factors):
        self.cloud = cloud
        self.factors = tuple(factors)
        self.d = cloud.d

    def _between(self, lo: float, hi: float) -> list:
        return [c for c in self.factors if lo < c.time <= hi]

    def origin(self) -> np.ndarray:
        zero = (0.0, np.zeros(self.d))
        at_zero = [c for c in self.factors if c.time == 0.0]
        out = np.empty(self.cloud.size)
        for j in range(self.cloud.size):
            pin = (self.cloud.t[j], self.cloud.x[j])
            out[j] = segment_expectation(at_zero + self._between(0.0, pin[0]), zero, pin, self.d)
        return out

    def between(self) -> np.ndarray:
        M = self.cloud.size
        out = np.zeros((M, M))
        for i in range(M):
            left = (self.cloud.t[i], self.cloud.x[i])
            for j in range(i + 1, M):
                right = (self.cloud.t[j], self.cloud.x[j])
                if right[0] > left[0]:
                    out[i, j] = segment_expectation(self._between(left[0], right[0]), left, right, self.d)
        return out

    def tail(self) -> np.ndarray:
        out = np.empty(self.cloud.size)
        for j in range(self.cloud.size):
            left = (self.cloud.t[j], self.cloud.x[j])
            out[j] = segment_expectation(self._between(left[0], 1.0), left, None, self.d)
        return out

    def empty(self) -> float:
        return segment_expectation(self.factors, (0.0, np.zeros(self.d)), None, self.d)


def _chain_values(cloud: PoissonCloud, beta_hat: float, weights: Optional[_Weights]) -> Tuple[np.ndarray, np.ndarray]:
    """h_j = β̂υ_j(ρ_{t_j}(x_j)c_j + Σ_{i<j} h_i K_ij c_ij) and the origin terms ρ_{t_j}(x_j)c_j."""
    M, d = cloud.size, cloud.d
    if M == 0:
        return np.empty(0), np.empty(0)
    start = gaussian_kernel(cloud.t, cloud.x, d)
    K = gaussian_kernel_matrix(cloud.t, cloud.x, d)
    if weights is not None:
        start = start * weights.origin()
        K = K * weights.between()
    h = np.empty(M)
    for j in range(M):
        h[j] = beta_hat * cloud.v[j] * (start[j] + h[:j] @ K[:j, j])
    return h, start


def _cylinder_parts(f: PathFunctional) -> List[Tuple[float, tuple]]:
    """(coefficient, factors) pairs of a constant/cylinder combination."""
    if f.kind == "constant_one":
        return [(1.0, ())]
    if f.kind == "cylinder":
        return [(1.0, f.factors)]
    if f.kind == "combination":
        parts = []
        for c, g in f.terms:
            parts.extend((c * cc, fac) for cc, fac in _cylinder_parts(g))
        return parts
    raise UnsupportedFunctionalError(
        f.kind, "the chain recursion needs constant or cylinder functionals; use continuum_partition_mc"
    )


def _check_inputs(cloud: PoissonCloud, beta_hat: float) -> None:
    if beta_hat < 0:
        raise DomainError("beta_hat must be >= 0", beta_hat=beta_hat)
    if cloud.t.size and (cloud.t.min() <= 0.0 or cloud.t.max() > 1.0):
        raise DomainError("cloud times must lie in (0, 1]")


def continuum_partition(
    cloud: PoissonCloud,
    beta_hat: float,
    f: Optional[PathFunctional] = None,
    centering: str = "standard",
) -> ContinuumPartition:
    """
    𝒵^{ω,a}_β̂(f) by the chain recursion.

    Args:
        cloud: Poisson cloud with weight floor a
        beta_hat: Disorder strength β̂ ≥ 0
        f: Constant, cylinder or a linear combination of them (default: f = 1)
        centering: "standard" uses κ_a, "shifted" uses κ'_a

    Returns:
        ContinuumPartition

    Raises:
        UnsupportedFunctionalError: For functionals without closed-form bridge weights
    """
    _check_inputs(cloud, beta_hat)
    f = f or PathFunctional.constant_one()
    parts = _cylinder_parts(f)
    kappa = centering_constant(cloud.alpha, cloud.a, centering)
    prefactor = math.exp(-beta_hat * kappa)

    total = 0.0
    for coef, factors in parts:
        weights = _Weights(cloud, factors) if factors else None
        h, _ = _chain_values(cloud, beta_hat, weights)
        if weights is None:
            total += coef * (1.0 + h.sum())
        else:
            tail = weights.tail() if h.size else np.empty(0)
            total += coef * (weights.empty() + h @ tail)
    value = prefactor * total
    logger.debug(f"continuum partition: M={cloud.size}, a={cloud.a}, value={value:.6g}")
    return ContinuumPartition(value, cloud.a, beta_hat, prefactor, window_exit_bound(cloud), centering=centering)


def continuum_partition_bruteforce(
    cloud: PoissonCloud,
    beta_hat: float,
    f: Optional[PathFunctional] = None,
    centering: str = "standard",
) -> ContinuumPartition:
    """Explicit sum over all 2^M subsets of the cloud (M ≤ MAX_SUBSET_POINTS)."""
    _check_inputs(cloud, beta_hat)
    if cloud.size > MAX_SUBSET_POINTS:
        raise ResourceGuardError("too many cloud points for subset enumeration", limit=MAX_SUBSET_POINTS, requested=cloud.size)
    f = f or PathFunctional.constant_one()
    parts = _cylinder_parts(f)
    prefactor = math.exp(-beta_hat * centering_constant(cloud.alpha, cloud.a, centering))
    d = cloud.d

    total = 0.0
    for size in range(cloud.size + 1):
        for subset in itertools.combinations(range(cloud.size), size):
            idx = list(subset)
            times, points = cloud.t[idx], cloud.x[idx]
            if size and np.any(np.diff(times) <= 0):
                continue
            weight = beta_hat**size * float(np.prod(cloud.v[idx])) * multistep_kernel(times, points, d)
            pins = list(zip(times, points))
            conditional = 0.0
            for coef, factors in parts:
                term = 1.0
                bounds = [(0.0, np.zeros(d))] + pins
                for k in range(len(bounds)):
                    lo = bounds[k][0]
                    hi = bounds[k + 1][0] if k + 1 < len(bounds) else 1.0
                    inside = [c for c in factors if (lo < c.time or (k == 0 and c.time == 0.0)) and c.time <= hi]
                    right = bounds[k + 1] if k + 1 < len(bounds) else None
                    term *= segment_expectation(inside, bounds[k], right, d)
                conditional += coef * term
            total += weight * conditional
    return ContinuumPartition(
        prefactor * total, cloud.a, beta_hat, prefactor, window_exit_bound(cloud), method="bruteforce", centering=centering
    )


def continuum_point_to_point(
    cloud: PoissonCloud,
    beta_hat: float,
    start: Tuple[float, object],
    end: Tuple[float, object],
    centering: str = "standard",
) -> float:
    """
    Point-to-point partition function from (t, x) to (t', x').

    Chains use the cloud points with t < t_i < t'; the prefactor is e^{-β̂κ_a(t'-t)}.
    """
    _check_inputs(cloud, beta_hat)
    d = cloud.d
    t0, x0 = float(start[0]), np.asarray(start[1], dtype=float).reshape(d)
    t1, x1 = float(end[0]), np.asarray(end[1], dtype=float).reshape(d)
    if not t0 < t1:
        raise DomainError("start time must be strictly before end time", start=t0, end=t1)
    prefactor = math.exp(-beta_hat * centering_constant(cloud.alpha, cloud.a, centering) * (t1 - t0))
    inside = (cloud.t > t0) & (cloud.t < t1)
    t, x, v = cloud.t[inside], cloud.x[inside], cloud.v[inside]
    direct = gaussian_kernel(t1 - t0, x1 - x0, d)
    if t.size == 0:
        return prefactor * direct
    first = gaussian_kernel(t - t0, x - x0[None, :], d)
    K = gaussian_kernel_matrix(t, x, d)
    h = np.empty(t.size)
    for j in range(t.size):
        h[j] = beta_hat * v[j] * (first[j] + h[:j] @ K[:j, j])
    last = gaussian_kernel(t1 - t, x1[None, :] - x, d)
    return prefactor * (direct + h @ last)


def sample_chain(cloud: PoissonCloud, beta_hat: float, gen: np.random.Generator, count: int = 1) -> List[List[int]]:
    """
    Chains σ ⊂ ω drawn from the polymer measure Q^{ω,a} with f = 1.

    The last element is j with probability h_j / (1 + Σh) (empty with 1 / (1 + Σh));
    each predecessor of j is i with probability proportional to h_i K_ij, the origin
    with weight ρ_{t_j}(x_j).
    """
    h, start = _chain_values(cloud, beta_hat, None)
    chains: List[List[int]] = []
    if h.size == 0:
        return [[] for _ in range(count)]
    K = gaussian_kernel_matrix(cloud.t, cloud.x, cloud.d)
    last_p = np.concatenate([[1.0], h])
    last_p = last_p / last_p.sum()
    for _ in range(count):
        j = int(gen.choice(h.size + 1, p=last_p)) - 1
        chain: List[int] = []
        while j >= 0:
            chain.append(j)
            w = np.concatenate([[start[j]], h[:j] * K[:j, j]])
            j = int(gen.choice(j + 1, p=w / w.sum())) - 1
        chains.append(chain[::-1])
    return chains


def sample_continuum_path(
    cloud: PoissonCloud,
    beta_hat: float,
    grid_times: np.ndarray,
    rng_key: StreamKey,
    count: int = 1,
) -> np.ndarray:
    """Exact samples of the continuum polymer path on ``grid_times``; array (count, T, d)."""
    _check_inputs(cloud, beta_hat)
    grid_times = np.asarray(grid_times, dtype=float)
    if grid_times[0] != 0.0 or np.any(np.diff(grid_times) <= 0) or grid_times[-1] > 1.0:
        raise DomainError("grid must be increasing in [0, 1] and start at 0")
    gen = generator(rng_key.child(Stream.BRIDGE))
    chains = sample_chain(cloud, beta_hat, gen, count)
    out = np.empty((count, grid_times.size, cloud.d))
    for k, chain in enumerate(chains):
        pins = [(cloud.t[i], cloud.x[i]) for i in chain]
        out[k] = bridge_paths(grid_times, pins, cloud.d, 1, gen)[0]
    return out


def continuum_partition_mc(
    cloud: PoissonCloud,
    beta_hat: float,
    f: PathFunctional,
    samples: int,
    rng_key: StreamKey,
    grid_steps: int = 256,
    centering: str = "standard",
) -> ContinuumPartition:
    """𝒵(f) = 𝒵(1)·Q^{ω,a}[f], the polymer expectation estimated from exact path samples."""
    if samples < 2:
        raise DomainError("need at least 2 samples", samples=samples)
    base = continuum_partition(cloud, beta_hat, None, centering)
    times = np.linspace(0.0, 1.0, grid_steps + 1)
    paths = sample_continuum_path(cloud, beta_hat, times, rng_key, samples)
    values = f.evaluate_continuous(times, paths)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(samples))
    return ContinuumPartition(
        base.value * mean, cloud.a, beta_hat, base.prefactor, base.window_exit_bound,
        std_error=base.value * se, method="monte_carlo", centering=centering,
    )
