"""Brownian bridges through pinned points.

Given pins (t_i, x_i) with 0 < t_1 < ... < t_k ≤ 1, the path from (0, 0) is a
concatenation of independent Gaussian bridges, followed by free Brownian motion
after the last pin. Cylinder functionals integrate exactly against this law by
nested Gauss-Hermite rules; everything else is sampled.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..config import GAUSS_HERMITE_NODES, MAX_BRIDGE_QUADRATURE_DIM
from ..lattice.functionals import CylinderFactor, PathFunctional
from ..utils.errors import DomainError, ResourceGuardError

logger = logging.getLogger(__name__)

Pin = Tuple[float, np.ndarray]


class BridgeEstimate(NamedTuple):
    value: float
    std_error: float = 0.0


def _hermite_rule(d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor rule for E[g(Z)], Z ~ N(0, I_d): nodes (n^d, d) and weights (n^d,)."""
    z, w = np.polynomial.hermite.hermgauss(GAUSS_HERMITE_NODES)
    z = z * math.sqrt(2.0)
    w = w / math.sqrt(math.pi)
    grids = np.meshgrid(*([z] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(nodes.shape[0])
    for g in np.meshgrid(*([w] * d), indexing="ij"):
        weights = weights * g.ravel()
    return nodes, weights


def segment_expectation(
    factors: Sequence[CylinderFactor],
    left: Pin,
    right: Optional[Pin],
    d: int,
) -> float:
    """
    E[Π g_i(B_{s_i})] for a bridge from ``left`` to ``right`` (free motion if right is None).

    All factor times must lie in [t_left, t_right].
    """
    if not factors:
        return 1.0
    t_left, x_left = left[0], np.asarray(left[1], dtype=float).reshape(d)
    if right is not None:
        t_right, x_right = right[0], np.asarray(right[1], dtype=float).reshape(d)
    random_dims = 0
    for c in factors:
        deterministic = c.time == t_left or (right is not None and c.time == t_right)
        random_dims += 0 if deterministic else d
    if random_dims > MAX_BRIDGE_QUADRATURE_DIM:
        raise ResourceGuardError(
            "bridge quadrature dimension too large; use continuum_partition_mc",
            limit=MAX_BRIDGE_QUADRATURE_DIM,
            requested=random_dims,
        )
    nodes, node_w = _hermite_rule(d)

    states = x_left[None, :]
    weights = np.ones(1)
    t_prev = t_left
    for c in factors:
        s = c.time
        if right is None:
            mean, var = states, s - t_prev
        else:
            span = t_right - t_prev
            mean = states + (s - t_prev) / span * (x_right - states) if span > 0 else states
            var = (s - t_prev) * (t_right - s) / span if span > 0 else 0.0
        if var <= 0.0:
            states = mean
        else:
            states = (mean[:, None, :] + math.sqrt(var) * nodes[None, :, :]).reshape(-1, d)
            weights = (weights[:, None] * node_w[None, :]).ravel()
        weights = weights * c.apply(states)
        t_prev = s
    return float(weights.sum())


def _segments(factors: Sequence[CylinderFactor], pins: Sequence[Pin]) -> List[Tuple[list, Pin, Optional[Pin]]]:
    """Split cylinder factors over the bridge segments (t_{i-1}, t_i] and the free tail."""
    bounds: List[Pin] = [(0.0, None)] + list(pins)
    out = []
    remaining = list(factors)
    for i in range(1, len(bounds)):
        t_hi = bounds[i][0]
        inside = [c for c in remaining if c.time <= t_hi]
        remaining = [c for c in remaining if c.time > t_hi]
        out.append((inside, bounds[i - 1], bounds[i]))
    out.append((remaining, bounds[-1], None))
    return out


def _check_pins(pins: Sequence[Pin], d: int) -> List[Pin]:
    checked = [(float(t), np.asarray(x, dtype=float).reshape(d)) for t, x in pins]
    times = [t for t, _ in checked]
    if any(not 0.0 < t <= 1.0 for t in times):
        raise DomainError("pin times must lie in (0, 1]", times=times)
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise DomainError("pin times must be strictly increasing", times=times)
    return checked


def cylinder_bridge_expectation(factors: Sequence[CylinderFactor], pins: Sequence[Pin], d: int) -> float:
    """Exact E_Q[Π g_i(B_{s_i}) | pins] as a product over independent segments."""
    pins = _check_pins(pins, d)
    total = 1.0
    for inside, left, right in _segments(factors, pins):
        if left[1] is None:
            left = (0.0, np.zeros(d))
        total *= segment_expectation(inside, left, right, d)
        if total == 0.0:
            break
    return total


def bridge_paths(
    times: np.ndarray,
    pins: Sequence[Pin],
    d: int,
    count: int,
    gen: np.random.Generator,
) -> np.ndarray:
    """
    ``count`` paths on ``times`` (increasing, starting at 0) through (0, 0) and the pins.

    A free Brownian path W on times ∪ pin times is corrected on each segment
    [t_L, t_R] by B_t = x_L + W_t - W_{t_L} + (t - t_L)/(t_R - t_L)(x_R - x_L - W_{t_R} + W_{t_L}).
    """
    pins = _check_pins(pins, d)
    times = np.asarray(times, dtype=float)
    pin_t = np.array([t for t, _ in pins])
    grid = np.union1d(times, pin_t)
    steps = np.diff(grid)
    increments = gen.standard_normal((count, steps.size, d)) * np.sqrt(steps)[None, :, None]
    W = np.concatenate([np.zeros((count, 1, d)), np.cumsum(increments, axis=1)], axis=1)

    B = W.copy()
    knots_t = np.concatenate([[0.0], pin_t])
    knots_x = np.vstack([np.zeros((1, d))] + [x[None, :] for _, x in pins])
    knot_idx = np.searchsorted(grid, knots_t)
    for j in range(knots_t.size):
        lo = knot_idx[j]
        hi = knot_idx[j + 1] if j + 1 < knots_t.size else grid.size - 1
        seg = slice(lo, hi + 1)
        base = W[:, lo:lo + 1, :]
        if j + 1 < knots_t.size:
            frac = ((grid[seg] - grid[lo]) / (grid[hi] - grid[lo]))[None, :, None]
            gap = knots_x[j + 1][None, None, :] - knots_x[j][None, None, :] - (W[:, hi:hi + 1, :] - base)
            B[:, seg, :] = knots_x[j][None, None, :] + W[:, seg, :] - base + frac * gap
        else:
            B[:, seg, :] = knots_x[j][None, None, :] + W[:, seg, :] - base
    keep = np.searchsorted(grid, times)
    return B[:, keep, :]


def bridge_expectation(
    f: PathFunctional,
    pins: Sequence[Pin],
    d: int = 1,
    gen: Optional[np.random.Generator] = None,
    samples: int = 20000,
    grid_steps: int = 256,
) -> BridgeEstimate:
    """
    E_Q[f | B_{t_i} = x_i for all pins].

    Constant and cylinder functionals (and combinations of them) are exact.
    Other functionals are estimated from ``samples`` bridge paths on a uniform
    grid of ``grid_steps`` steps, which requires ``gen``.
    """
    if f.kind == "constant_one":
        _check_pins(pins, d)
        return BridgeEstimate(1.0)
    if f.kind == "cylinder":
        return BridgeEstimate(cylinder_bridge_expectation(f.factors, pins, d))
    if f.kind == "combination" and all(g.kind in ("constant_one", "cylinder") for _, g in f.terms):
        return BridgeEstimate(sum(c * bridge_expectation(g, pins, d).value for c, g in f.terms))
    if gen is None:
        raise DomainError("a random generator is required for Monte-Carlo bridge expectations", kind=f.kind)
    times = np.linspace(0.0, 1.0, grid_steps + 1)
    paths = bridge_paths(times, pins, d, samples, gen)
    values = f.evaluate_continuous(times, paths)
    return BridgeEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples)))
