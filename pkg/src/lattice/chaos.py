"""Chaos expansion of the truncated partition function over high-disorder sites.

With Ω = {(n,x): 1+η_{n,x} ∈ [aV_N, bV_N)} sorted by time, the expansion

    Z̄(f) = E[f(S) Π_{(n,x)∈Ω} (1 + β η_{n,x} 1{S_n = x})]

is a sum over increasing chains in Ω. It is evaluated by the recursion

    h_j = β η_j (P_0(j) + Σ_{i: n_i < n_j} h_i P(i, j)),   Z̄ = E[f] + Σ_j h_j T(j)

where the propagator P carries the walk kernel together with the
functional's transition weights and T is the remaining weight to time N.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.stats import binom

from ..disorder.scaling import ScalingPlan, kappa_a
from ..utils.errors import DegeneracyError, DomainError
from .environment import EnvSlab, parity_mask
from .functionals import FactoredTerm, PathFunctional
from .kernel import _binomial_kernel, crop, spread, walk_kernel_array
from .partition import _factor_schedule, _grid_points, partition_dp

logger = logging.getLogger(__name__)


class HighSites(NamedTuple):
    """Sites of Ω sorted by time: times (M,), points (M, d), values (M,)."""
    n: np.ndarray
    x: np.ndarray
    eta: np.ndarray

    @property
    def size(self) -> int:
        return int(self.n.size)


def exceedance_sites(env: EnvSlab, lower: float, upper: float, radius: Optional[int] = None) -> HighSites:
    """Reachable sites with 1+η ∈ [lower, upper), optionally within |x|_∞ ≤ radius."""
    ns, xs, etas = [], [], []
    for n in range(1, env.N + 1):
        r = n if radius is None else min(n, radius)
        values = env.layer(n, r)
        hit = parity_mask(n, r, env.d) & (1.0 + values >= lower) & (1.0 + values < upper)
        if hit.any():
            idx = np.argwhere(hit)
            ns.append(np.full(len(idx), n))
            xs.append(idx - r)
            etas.append(values[hit])
    if not ns:
        return HighSites(np.empty(0, dtype=np.int64), np.empty((0, env.d), dtype=np.int64), np.empty(0))
    return HighSites(np.concatenate(ns), np.concatenate(xs), np.concatenate(etas))


# -- propagators ------------------------------------------------------------

class FreePropagator:
    """Unkilled walk without cylinder weights."""

    def __init__(self, N: int, d: int):
        self.N, self.d = N, d

    def empty(self) -> float:
        return 1.0

    def origin(self, sites: HighSites) -> np.ndarray:
        return walk_kernel_array(sites.n, sites.x, self.d)

    def between(self, sites: HighSites) -> np.ndarray:
        dn = sites.n[None, :] - sites.n[:, None]
        dx = sites.x[None, :, :] - sites.x[:, None, :]
        out = walk_kernel_array(np.maximum(dn, 0).ravel(), dx.reshape(-1, self.d), self.d).reshape(dn.shape)
        return np.where(dn > 0, out, 0.0)

    def tail(self, sites: HighSites) -> np.ndarray:
        return np.ones(sites.size)


class KilledLinePropagator:
    """One-dimensional walk killed on leaving [-r, r], by the method of images."""

    def __init__(self, N: int, radius: int):
        self.N = N
        self.r = radius
        self.b = radius + 1

    def _images(self, k: int) -> range:
        J = (k + 3 * self.b) // (4 * self.b) + 1
        return range(-J, J + 1)

    def _kernel(self, k: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        k = np.asarray(k)
        inside = (np.abs(x) <= self.r) & (np.abs(y) <= self.r)
        out = np.zeros(np.broadcast(k, x, y).shape)
        J = (int(np.max(k, initial=0)) + 3 * self.b) // (4 * self.b) + 1
        for j in range(-J, J + 1):
            shift = 4 * self.b * j
            out += _binomial_kernel(k, y - x + shift) - _binomial_kernel(k, 2 * self.b - y - x + shift)
        return np.where(inside, out, 0.0)

    def _interval_prob(self, k: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """P(S_k ∈ [lo, hi]) for the free walk, S_k = 2B - k with B ~ Bin(k, 1/2)."""
        b_hi = np.floor((hi + k) / 2.0)
        b_lo = np.ceil((lo + k) / 2.0)
        return np.where(b_hi >= b_lo, binom.cdf(b_hi, k, 0.5) - binom.cdf(b_lo - 1, k, 0.5), 0.0)

    def _survival(self, k: int, x: np.ndarray) -> np.ndarray:
        if k == 0:
            return (np.abs(x) <= self.r).astype(float)
        out = np.zeros(x.shape, dtype=float)
        for j in self._images(k):
            shift = 4 * self.b * j
            out += self._interval_prob(k, -self.r - x + shift, self.r - x + shift)
            out -= self._interval_prob(k, 2 * self.b - self.r - x + shift, 2 * self.b + self.r - x + shift)
        return np.where(np.abs(x) <= self.r, out, 0.0)

    def empty(self) -> float:
        return float(self._survival(self.N, np.zeros(1))[0])

    def origin(self, sites: HighSites) -> np.ndarray:
        return self._kernel(sites.n, np.zeros(sites.size, dtype=np.int64), sites.x[:, 0])

    def between(self, sites: HighSites) -> np.ndarray:
        dn = sites.n[None, :] - sites.n[:, None]
        out = self._kernel(np.maximum(dn, 0), sites.x[:, 0][:, None], sites.x[:, 0][None, :])
        return np.where(dn > 0, out, 0.0)

    def tail(self, sites: HighSites) -> np.ndarray:
        out = np.empty(sites.size)
        for i, (n, x) in enumerate(zip(sites.n, sites.x[:, 0])):
            out[i] = self._survival(self.N - int(n), np.array([x]))[0]
        return out


class DPPropagator:
    """Generic propagator from forward DPs with the term's kill radius and cylinder weights."""

    def __init__(self, N: int, d: int, term: FactoredTerm):
        self.N, self.d = N, d
        self.radius = N if term.kill_radius is None else min(term.kill_radius, N)
        self.at_layer, self.on_step = _factor_schedule(term.factors, N)
        self.scale = math.sqrt(d / N)

    def _forward(self, n0: int, x0: np.ndarray, sites: HighSites) -> Tuple[np.ndarray, float]:
        """Weights from (n0, x0) to every later site, and the total mass at time N."""
        d = self.d
        r = min(n0, self.radius)
        reached = np.zeros(sites.size)
        if np.abs(x0).max(initial=0) > r:
            return reached, 0.0
        u = np.zeros((2 * r + 1,) * d)
        u[tuple(x0 + r)] = 1.0
        if n0 == 0:
            for c in self.at_layer.get(0, []):
                u = u * c.apply(np.zeros((1, d)))[0]
        for n in range(n0, self.N):
            step = self.on_step.get(n)
            weight_fn = None
            if step:
                pts = _grid_points(r, d).astype(float)

                def weight_fn(axis, sign, _pts=pts, _step=step):
                    w = np.ones(_pts.shape[:-1])
                    for c, frac in _step:
                        shift = np.zeros(d)
                        shift[axis] = sign * frac
                        w = w * c.apply(self.scale * (_pts + shift))
                    return w

            u = spread(u, d, weight_fn)
            r += 1
            if r > self.radius:
                u = crop(u, d, self.radius)
                r = self.radius
            for c in self.at_layer.get(n + 1, []):
                u = u * c.apply(self.scale * _grid_points(r, d))
            hit = np.nonzero(sites.n == n + 1)[0]
            for j in hit:
                pt = sites.x[j]
                if np.abs(pt).max() <= r:
                    reached[j] = u[tuple(pt + r)]
        return reached, float(u.sum())

    def prepare(self, sites: HighSites) -> None:
        self._origin, self._empty = self._forward(0, np.zeros(self.d, dtype=np.int64), sites)
        M = sites.size
        self._between = np.zeros((M, M))
        self._tail = np.zeros(M)
        for i in range(M):
            self._between[i], self._tail[i] = self._forward(int(sites.n[i]), sites.x[i], sites)
        # site weights enter the chain separately; only strictly later sites count
        self._between = np.where(sites.n[None, :] > sites.n[:, None], self._between, 0.0)

    def empty(self) -> float:
        return self._empty

    def origin(self, sites: HighSites) -> np.ndarray:
        return self._origin

    def between(self, sites: HighSites) -> np.ndarray:
        return self._between

    def tail(self, sites: HighSites) -> np.ndarray:
        return self._tail


def propagator_for(term: FactoredTerm, N: int, d: int):
    """Cheapest exact propagator for one factored term."""
    unkilled = term.kill_radius is None or term.kill_radius >= N
    if not term.factors and unkilled:
        return FreePropagator(N, d)
    if not term.factors and d == 1:
        return KilledLinePropagator(N, int(term.kill_radius))
    return DPPropagator(N, d, term)


def chain_sum(sites: HighSites, beta: float, propagator) -> float:
    """E[term weight] + Σ_j h_j T(j) over chains of ``sites``."""
    if isinstance(propagator, DPPropagator):
        propagator.prepare(sites)
    total = propagator.empty()
    if sites.size == 0:
        return total
    origin = propagator.origin(sites)
    trans = propagator.between(sites)
    h = np.zeros(sites.size)
    for j in range(sites.size):
        h[j] = beta * sites.eta[j] * (origin[j] + h[:j] @ trans[:j, j])
    return float(total + h @ propagator.tail(sites))


def chaos_expansion(
    env: EnvSlab,
    beta: float,
    a: float,
    b: float,
    f: Optional[PathFunctional] = None,
    V_N: float = 1.0,
) -> float:
    """
    Z̄^{η,[a,b)}(f) by the time-ordered chain recursion.

    Args:
        env: Disorder slab
        beta: Disorder intensity in (0, 1)
        a: Lower cutoff (> 0)
        b: Upper cutoff (may be inf)
        f: Transition-factoring functional
        V_N: Disorder scale defining the band [aV_N, bV_N)
    """
    if a <= 0:
        raise DomainError("chaos expansion needs a > 0; with a = 0 every site is a chain site", a=a)
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)", beta=beta)
    f = f or PathFunctional.constant_one()
    N, d = env.N, env.d
    terms = f.factor_terms(N, d)
    radii = [t.kill_radius for t in terms]
    scan_radius = None if any(r is None for r in radii) else max(radii)
    sites = exceedance_sites(env, a * V_N, b * V_N, scan_radius)
    logger.debug(f"chaos_expansion: {sites.size} chain sites (N={N}, d={d}, a={a}, b={b})")
    return float(sum(t.coef * chain_sum(sites, beta, propagator_for(t, N, d)) for t in terms))


class RatioCheck(NamedTuple):
    lhs_ratio: float
    target: float
    degenerate: bool = False


def ratio_check(env: EnvSlab, plan: ScalingPlan, a: float, b: float = math.inf, f: Optional[PathFunctional] = None) -> RatioCheck:
    """
    e^{-β̂γ_N 1{α=1}} Z^{η,[a,b)}(f) / Z̄^{η,[a,b)}(f) against e^{-β̂κ_a}.

    Returns a degenerate flag (and NaN ratio) when Z̄ vanishes.
    """
    if a <= 0:
        raise DomainError("ratio_check needs a > 0", a=a)
    f = f or PathFunctional.support_cutoff(3.0)
    if not f.is_nonnegative:
        raise DomainError("ratio_check needs a non-negative functional", functional=f.describe())
    target = math.exp(-plan.beta_hat * kappa_a(plan.alpha, a))
    z_bar = chaos_expansion(env, plan.beta_N, a, b, f, V_N=plan.V_N)
    if z_bar <= 0.0:
        logger.warning(f"ratio_check: vanishing chaos expansion at N={plan.N}")
        return RatioCheck(float("nan"), target, degenerate=True)
    z = partition_dp(env, plan.beta_N, plan.truncation(a, b), f).normalized(plan).value
    return RatioCheck(z / z_bar, target)


def require_nondegenerate(check: RatioCheck) -> RatioCheck:
    """Raise DegeneracyError on a flagged ratio (CLI exit 4)."""
    if check.degenerate:
        raise DegeneracyError("chaos expansion vanished; ratio undefined")
    return check
