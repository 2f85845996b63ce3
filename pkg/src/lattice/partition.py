"""Point-to-line and point-to-point partition functions of the discrete polymer."""

import logging
import math
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ..config import MAX_BRUTEFORCE_PATHS
from ..disorder.scaling import ScalingPlan, TruncationSpec, truncate_eta
from ..utils.errors import DomainError, ResourceGuardError
from ..utils.resampling import jackknife_mean_se
from ..utils.rng import Stream, StreamKey, generator
from .environment import EnvSlab, parity_mask
from .functionals import CylinderFactor, FactoredTerm, PathFunctional, split_time
from .kernel import crop, spread

logger = logging.getLogger(__name__)


class PartitionResult:
    """Partition function value with the prefactor applied to it."""

    def __init__(self, value: float, normalization: float = 1.0, meta: Optional[dict] = None):
        self.value = float(value)
        self.normalization = float(normalization)
        self.meta = dict(meta or {})
        self.meta.setdefault("normalized", normalization != 1.0)

    def normalized(self, plan: ScalingPlan) -> "PartitionResult":
        """Apply e^{-β̂γ_N 1{α=1}}; refuses a second application."""
        if self.meta.get("normalized"):
            raise DomainError("normalization already applied", meta=self.meta)
        factor = plan.normalization
        return PartitionResult(self.value * factor, factor, {**self.meta, "normalized": True})

    def to_dict(self) -> dict:
        return {"value": self.value, "normalization": self.normalization, "meta": self.meta}

    def __repr__(self) -> str:
        return f"PartitionResult(value={self.value!r}, normalization={self.normalization!r})"


class MCEstimate(NamedTuple):
    estimate: float
    std_error: float


class P2PResult(NamedTuple):
    value: float
    normalized: Optional[float]


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)", beta=beta)


@lru_cache(maxsize=256)
def _grid_points(r: int, d: int) -> np.ndarray:
    pts = np.moveaxis(np.indices((2 * r + 1,) * d) - r, 0, -1)
    pts.setflags(write=False)
    return pts


def _cheb_radius(r: int, d: int) -> np.ndarray:
    return np.abs(_grid_points(r, d)).max(axis=-1)


def _truncated_layer(env: EnvSlab, n: int, r: int, trunc: TruncationSpec) -> np.ndarray:
    values = env.layer(n, r)
    if trunc.is_identity:
        return values
    out = truncate_eta(values, trunc)
    return np.where(parity_mask(n, r, env.d), out, 0.0)


def _factor_schedule(factors, N: int) -> Tuple[Dict[int, list], Dict[int, list]]:
    """Split cylinder factors into on-layer (frac=0) and on-transition (frac>0) groups."""
    at_layer: Dict[int, list] = {}
    on_step: Dict[int, list] = {}
    for c in factors:
        m, frac = split_time(c.time, N)
        if frac == 0.0:
            at_layer.setdefault(m, []).append(c)
        else:
            on_step.setdefault(m, []).append((c, frac))
    return at_layer, on_step


def _run_dp(
    env: EnvSlab,
    beta: float,
    trunc: TruncationSpec,
    factors: Tuple[CylinderFactor, ...],
    radii: List[int],
) -> np.ndarray:
    """Batched forward DP; one row per kill radius. Returns Σ_x u_N(x) per row."""
    N, d = env.N, env.d
    scale = math.sqrt(d / N)
    radii_arr = np.asarray(radii)
    r_max = int(radii_arr.max())
    at_layer, on_step = _factor_schedule(factors, N)

    u = np.ones((len(radii),) + (1,) * d)
    for c in at_layer.get(0, []):
        u = u * c.apply(np.zeros((1, d)))[0]

    r = 0
    for n in range(N):
        step = on_step.get(n)
        weight_fn = None
        if step:
            pts = _grid_points(r, d).astype(float)

            def weight_fn(axis: int, sign: int, _pts=pts, _step=step):
                shift = np.zeros(d)
                w = np.ones(_pts.shape[:-1])
                for c, frac in _step:
                    shift[:] = 0.0
                    shift[axis] = sign * frac
                    w = w * c.apply(scale * (_pts + shift))
                return w

        u = spread(u, d, weight_fn)
        r += 1
        if r > r_max:
            u = crop(u, d, r_max)
            r = r_max
        u = u * (1.0 + beta * _truncated_layer(env, n + 1, r, trunc))
        for c in at_layer.get(n + 1, []):
            u = u * c.apply(scale * _grid_points(r, d))
        if radii_arr.min() < r:
            cheb = _cheb_radius(r, d)
            alive = cheb[None, ...] <= radii_arr.reshape((-1,) + (1,) * d)
            u = u * alive
    return u.reshape(len(radii), -1).sum(axis=1)


def partition_dp(
    env: EnvSlab,
    beta: float,
    trunc: Optional[TruncationSpec] = None,
    f: Optional[PathFunctional] = None,
    window: Optional[float] = None,
) -> PartitionResult:
    """
    Exact Z^{η,[a,b)}_{N,β}(f) by forward DP over H_d.

    Args:
        env: Disorder slab
        beta: Disorder intensity in (0, 1)
        trunc: Cutoff applied to η (identity when omitted)
        f: Transition-factoring functional (constant_one, cylinder, support_cutoff
           or combinations of those)
        window: Optional rescaled radius; paths leaving |x|_∞ ≤ window·√(N/d) are killed

    Returns:
        PartitionResult (unnormalized)

    Raises:
        UnsupportedFunctionalError: for functionals that do not factor
    """
    _check_beta(beta)
    trunc = trunc or TruncationSpec.none()
    f = f or PathFunctional.constant_one()
    N, d = env.N, env.d
    terms: List[FactoredTerm] = f.factor_terms(N, d)
    window_radius = None if window is None else int(math.floor(window * math.sqrt(N / d)))

    groups: Dict[Tuple[CylinderFactor, ...], List[FactoredTerm]] = {}
    for t in terms:
        groups.setdefault(t.factors, []).append(t)

    total = 0.0
    for factors, group in groups.items():
        radii = []
        for t in group:
            rad = N if t.kill_radius is None else min(t.kill_radius, N)
            if window_radius is not None:
                rad = min(rad, window_radius)
            radii.append(rad)
        sums = _run_dp(env, beta, trunc, factors, radii)
        total += float(np.dot([t.coef for t in group], sums))

    meta = {
        "N": N, "d": d, "beta": beta, "truncation": trunc.describe(),
        "functional": f.describe(), "window": window, "method": "dp",
    }
    logger.debug(f"partition_dp: {total} ({meta})")
    return PartitionResult(total, 1.0, meta)


def _directions(d: int) -> np.ndarray:
    dirs = np.zeros((2 * d, d), dtype=np.int64)
    for k in range(d):
        dirs[2 * k, k] = 1
        dirs[2 * k + 1, k] = -1
    return dirs


def _paths_from_steps(steps: np.ndarray, d: int) -> np.ndarray:
    moves = _directions(d)[steps]
    paths = np.zeros((steps.shape[0], steps.shape[1] + 1, d), dtype=np.int64)
    np.cumsum(moves, axis=1, out=paths[:, 1:, :])
    return paths


def _path_weights(env: EnvSlab, beta: float, layers: List[np.ndarray], paths: np.ndarray) -> np.ndarray:
    w = np.ones(paths.shape[0])
    for n in range(1, env.N + 1):
        idx = tuple((paths[:, n, k] + n) for k in range(env.d))
        w = w * (1.0 + beta * layers[n - 1][idx])
    return w


def partition_bruteforce(
    env: EnvSlab,
    beta: float,
    trunc: Optional[TruncationSpec] = None,
    f: Optional[PathFunctional] = None,
) -> PartitionResult:
    """Exact average of f(S^(N)) Π(1+βη̃) over all (2d)^N paths."""
    _check_beta(beta)
    trunc = trunc or TruncationSpec.none()
    f = f or PathFunctional.constant_one()
    N, d = env.N, env.d
    total_paths = (2 * d) ** N
    if total_paths > MAX_BRUTEFORCE_PATHS:
        raise ResourceGuardError("too many paths to enumerate", limit=MAX_BRUTEFORCE_PATHS, requested=total_paths)

    layers = [_truncated_layer(env, n, n, trunc) for n in range(1, N + 1)]
    powers = (2 * d) ** np.arange(N, dtype=np.int64)
    acc = 0.0
    chunk = 1 << 16
    for start in range(0, total_paths, chunk):
        idx = np.arange(start, min(start + chunk, total_paths), dtype=np.int64)
        steps = (idx[:, None] // powers[None, :]) % (2 * d)
        paths = _paths_from_steps(steps, d)
        acc += float(np.sum(f.evaluate(paths, N, d) * _path_weights(env, beta, layers, paths)))
    meta = {"N": N, "d": d, "beta": beta, "truncation": trunc.describe(), "functional": f.describe(), "method": "bruteforce"}
    return PartitionResult(acc / total_paths, 1.0, meta)


def partition_mc(
    env: EnvSlab,
    beta: float,
    trunc: Optional[TruncationSpec],
    f: Optional[PathFunctional],
    replicas: int,
    rng_key: StreamKey,
) -> MCEstimate:
    """Path-average Monte-Carlo estimate of Z(f) with jackknife standard error."""
    _check_beta(beta)
    if replicas < 2:
        raise DomainError("partition_mc needs at least 2 replicas", replicas=replicas)
    trunc = trunc or TruncationSpec.none()
    f = f or PathFunctional.constant_one()
    N, d = env.N, env.d
    layers = [_truncated_layer(env, n, n, trunc) for n in range(1, N + 1)]
    gen = generator(rng_key.child(Stream.WALK))
    samples = np.empty(replicas)
    chunk = 1 << 15
    for start in range(0, replicas, chunk):
        size = min(chunk, replicas - start)
        paths = _paths_from_steps(gen.integers(0, 2 * d, size=(size, N)), d)
        samples[start:start + size] = f.evaluate(paths, N, d) * _path_weights(env, beta, layers, paths)
    return MCEstimate(float(samples.mean()), jackknife_mean_se(samples))


def point_to_point_partition(
    env: EnvSlab,
    beta: float,
    start: Tuple[int, Tuple[int, ...]],
    end: Tuple[int, Tuple[int, ...]],
    trunc: Optional[TruncationSpec] = None,
    plan: Optional[ScalingPlan] = None,
) -> P2PResult:
    """
    Z^η[(n1,x1),(n2,x2)] = E[Π_{n1<n≤n2}(1+βη_{n,S_n}) 1{S_{n2}=x2} | S_{n1}=x1].

    The normalized value ½(N/d)^{d/2} e^{-β̂γ_N 1{α=1}} Z is returned when a plan is given.
    """
    _check_beta(beta)
    trunc = trunc or TruncationSpec.none()
    d = env.d
    (n1, x1), (n2, x2) = start, end
    x1 = np.atleast_1d(np.asarray(x1, dtype=np.int64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.int64))
    if not 0 <= n1 <= n2 <= env.N:
        raise DomainError("need 0 <= n1 <= n2 <= N", n1=n1, n2=n2, N=env.N)
    if int(np.abs(x2 - x1).sum()) % 2 != (n2 - n1) % 2 or int(np.abs(x2 - x1).max(initial=0)) > n2 - n1:
        raise DomainError("endpoints violate the parity/reach constraint", start=start, end=end)
    if int(np.abs(x1).max(initial=0)) > n1 or (n1 + int(np.abs(x1).sum())) % 2:
        raise DomainError("starting site is not reachable from the origin", start=start)

    u = np.zeros((2 * n1 + 1,) * d)
    u[tuple(x1 + n1)] = 1.0
    for n in range(n1 + 1, n2 + 1):
        u = spread(u, d) * (1.0 + beta * _truncated_layer(env, n, n, trunc))
    value = float(u[tuple(x2 + n2)])
    normalized = value * plan.p2p_normalization() if plan is not None else None
    return P2PResult(value, normalized)
