"""Declarative path functionals f(S^(N)).

Functionals are evaluated either directly on explicit paths (brute force,
Monte Carlo, sampled continuum paths) or, for the DP, decomposed into terms
that factor over walk transitions:

    f = Σ_j c_j · 1{max_n |S_n|_∞ ≤ r_j} · Π_i g_i(S^(N)_{t_i})

Support cutoffs h_A are written exactly as a non-negative combination of
killed-walk indicators over integer levels r.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import DomainError, UnsupportedFunctionalError

_TIME_TOL = 1e-9


def split_time(t: float, N: int) -> Tuple[int, float]:
    """(⌊Nt⌋, Nt - ⌊Nt⌋) with lattice times snapped to integers."""
    if not 0.0 <= t <= 1.0:
        raise DomainError("time must lie in [0, 1]", t=t)
    x = N * t
    k = round(x)
    if abs(x - k) < _TIME_TOL:
        return int(k), 0.0
    m = math.floor(x)
    return int(m), float(x - m)


def rescale_positions(paths: np.ndarray, t: float, N: int, d: int) -> np.ndarray:
    """S^(N)_t for a batch of lattice paths of shape (P, N+1, d)."""
    m, frac = split_time(t, N)
    scale = math.sqrt(d / N)
    if frac == 0.0:
        return scale * paths[:, m, :].astype(float)
    return scale * ((1.0 - frac) * paths[:, m, :] + frac * paths[:, m + 1, :])


# -- picklable g factors --------------------------------------------------

@dataclass(frozen=True)
class GaussianFactor:
    """g(x) = exp(-|x - center|² / (2 width²)), bounded by 1."""
    center: float = 0.0
    width: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(-np.sum((x - self.center) ** 2, axis=-1) / (2.0 * self.width**2))


@dataclass(frozen=True)
class IndicatorFactor:
    """g(x) = 1{|x - center|_∞ ≤ radius}."""
    center: float = 0.0
    radius: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (np.max(np.abs(x - self.center), axis=-1) <= self.radius).astype(float)


@dataclass(frozen=True)
class CoordinateFactor:
    """g(x) = x_axis clipped to [-bound, bound]."""
    axis: int = 0
    bound: float = 10.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(x[..., self.axis], -self.bound, self.bound)


@dataclass(frozen=True)
class CylinderFactor:
    """One factor g(φ(time)) of a product cylinder functional."""
    time: float
    g: Callable[[np.ndarray], np.ndarray]
    bound: float = 1.0

    def apply(self, positions: np.ndarray) -> np.ndarray:
        values = np.asarray(self.g(positions), dtype=float)
        if np.any(np.abs(values) > self.bound * (1 + 1e-12)):
            raise DomainError("cylinder factor exceeds its declared bound", time=self.time, bound=self.bound)
        return values


@dataclass(frozen=True)
class FactoredTerm:
    """c · 1{walk stays in [-kill_radius, kill_radius]^d} · Π factors."""
    coef: float
    kill_radius: Optional[int]
    factors: Tuple[CylinderFactor, ...] = ()


@dataclass(frozen=True)
class PathFunctional:
    """A test functional of the rescaled path."""

    kind: str
    factors: Tuple[CylinderFactor, ...] = ()
    joint_times: Tuple[float, ...] = ()
    joint: Optional[Callable[[np.ndarray], np.ndarray]] = None
    A: Optional[float] = None
    base: Optional["PathFunctional"] = None
    terms: Tuple[Tuple[float, "PathFunctional"], ...] = field(default=())
    bound: float = 1.0

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant_one(cls) -> "PathFunctional":
        return cls(kind="constant_one")

    @classmethod
    def cylinder(cls, factors: Sequence[CylinderFactor]) -> "PathFunctional":
        """Product cylinder Π g_i(φ(t_i)) with strictly increasing times."""
        factors = tuple(sorted(factors, key=lambda c: c.time))
        times = [c.time for c in factors]
        if any(not 0.0 <= t <= 1.0 for t in times):
            raise DomainError("cylinder times must lie in [0, 1]", times=times)
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise DomainError("cylinder times must be strictly increasing", times=times)
        bound = math.prod(c.bound for c in factors) if factors else 1.0
        return cls(kind="cylinder", factors=factors, bound=bound)

    @classmethod
    def joint_cylinder(cls, times: Sequence[float], g: Callable[[np.ndarray], np.ndarray], bound: float) -> "PathFunctional":
        """General cylinder g(φ(t_1), ..., φ(t_k)); does not factor over transitions."""
        times = tuple(float(t) for t in times)
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])) or any(not 0 <= t <= 1 for t in times):
            raise DomainError("cylinder times must be increasing in [0, 1]", times=times)
        return cls(kind="joint_cylinder", joint_times=times, joint=g, bound=bound)

    @classmethod
    def support_cutoff(cls, A: float, base: Optional["PathFunctional"] = None) -> "PathFunctional":
        """h_A(φ) · base(φ) with h_A = 1 on ‖φ‖∞ ≤ A, 0 on ‖φ‖∞ ≥ A+1, linear between."""
        if A < 0:
            raise DomainError("support radius must be >= 0", A=A)
        base = base or cls.constant_one()
        return cls(kind="support_cutoff", A=float(A), base=base, bound=base.bound)

    @classmethod
    def combination(cls, terms: Sequence[Tuple[float, "PathFunctional"]]) -> "PathFunctional":
        terms = tuple((float(c), f) for c, f in terms)
        return cls(kind="combination", terms=terms, bound=sum(abs(c) * f.bound for c, f in terms))

    # -- properties -----------------------------------------------------

    @property
    def is_nonnegative(self) -> bool:
        """Conservative: True only when non-negativity is structural."""
        if self.kind == "constant_one":
            return True
        if self.kind == "cylinder":
            return all(isinstance(c.g, (GaussianFactor, IndicatorFactor)) for c in self.factors)
        if self.kind == "support_cutoff":
            return self.base.is_nonnegative
        if self.kind == "combination":
            return all(c >= 0 and f.is_nonnegative for c, f in self.terms)
        return False

    def describe(self) -> str:
        if self.kind == "cylinder":
            return "cylinder(" + ",".join(f"{c.time:g}" for c in self.factors) + ")"
        if self.kind == "support_cutoff":
            return f"support_cutoff(A={self.A:g},{self.base.describe()})"
        if self.kind == "combination":
            return "combination(" + "+".join(f"{c:g}*{f.describe()}" for c, f in self.terms) + ")"
        return self.kind

    # -- direct evaluation ----------------------------------------------

    def evaluate(self, paths: np.ndarray, N: int, d: int) -> np.ndarray:
        """f on each lattice path of a (P, N+1, d) batch."""
        paths = np.asarray(paths)
        P = paths.shape[0]
        if self.kind == "constant_one":
            return np.ones(P)
        if self.kind == "cylinder":
            out = np.ones(P)
            for c in self.factors:
                out = out * c.apply(rescale_positions(paths, c.time, N, d))
            return out
        if self.kind == "joint_cylinder":
            pts = np.stack([rescale_positions(paths, t, N, d) for t in self.joint_times], axis=1)
            return np.asarray(self.joint(pts), dtype=float)
        if self.kind == "support_cutoff":
            sup = np.abs(paths).max(axis=(1, 2)) * math.sqrt(d / N)
            return np.clip(self.A + 1.0 - sup, 0.0, 1.0) * self.base.evaluate(paths, N, d)
        if self.kind == "combination":
            out = np.zeros(P)
            for c, f in self.terms:
                out = out + c * f.evaluate(paths, N, d)
            return out
        raise UnsupportedFunctionalError(self.kind, "unknown functional kind")

    def evaluate_continuous(self, times: np.ndarray, positions: np.ndarray) -> np.ndarray:
        """
        f on paths sampled on a time grid (piecewise linear between grid points).

        Args:
            times: Increasing grid in [0, 1] starting at 0, shape (T,)
            positions: Path values, shape (P, T, d)
        """
        P = positions.shape[0]

        def at(t: float) -> np.ndarray:
            j = int(np.searchsorted(times, t, side="right")) - 1
            j = min(max(j, 0), len(times) - 1)
            if j == len(times) - 1 or math.isclose(times[j], t, abs_tol=1e-14):
                return positions[:, j, :]
            w = (t - times[j]) / (times[j + 1] - times[j])
            return (1.0 - w) * positions[:, j, :] + w * positions[:, j + 1, :]

        if self.kind == "constant_one":
            return np.ones(P)
        if self.kind == "cylinder":
            out = np.ones(P)
            for c in self.factors:
                out = out * c.apply(at(c.time))
            return out
        if self.kind == "joint_cylinder":
            return np.asarray(self.joint(np.stack([at(t) for t in self.joint_times], axis=1)), dtype=float)
        if self.kind == "support_cutoff":
            sup = np.abs(positions).max(axis=(1, 2))
            return np.clip(self.A + 1.0 - sup, 0.0, 1.0) * self.base.evaluate_continuous(times, positions)
        if self.kind == "combination":
            return sum(c * f.evaluate_continuous(times, positions) for c, f in self.terms)
        raise UnsupportedFunctionalError(self.kind, "unknown functional kind")

    # -- transition factorization -----------------------------------------

    def factor_terms(self, N: int, d: int) -> List[FactoredTerm]:
        """Decompose into transition-factoring terms; raises for joint cylinders."""
        if self.kind == "constant_one":
            return [FactoredTerm(1.0, None, ())]
        if self.kind == "cylinder":
            return [FactoredTerm(1.0, None, self.factors)]
        if self.kind == "combination":
            out = []
            for c, f in self.terms:
                out.extend(FactoredTerm(c * t.coef, t.kill_radius, t.factors) for t in f.factor_terms(N, d))
            return out
        if self.kind == "support_cutoff":
            out = []
            for r, w in cutoff_levels(self.A, N, d):
                for t in self.base.factor_terms(N, d):
                    radius = r if t.kill_radius is None else min(r, t.kill_radius)
                    out.append(FactoredTerm(t.coef * w, radius, t.factors))
            return out
        raise UnsupportedFunctionalError(
            self.kind, "this functional does not factor over the walk; use partition_mc or partition_bruteforce"
        )


def cutoff_levels(A: float, N: int, d: int) -> List[Tuple[int, float]]:
    """
    Integer levels r and weights w_r with h_A = Σ_r w_r 1{max_n |S_n|_∞ ≤ r}.

    A level r ≥ N never kills, since |S_n|_∞ ≤ n ≤ N.
    """
    c = math.sqrt(N / d)

    def h(m: int) -> float:
        return min(1.0, max(0.0, A + 1.0 - m / c))

    r_top = min(N, math.ceil((A + 1.0) * c))
    r_lo = min(max(0, math.floor(A * c)), r_top)
    levels = []
    for r in range(r_lo, r_top + 1):
        w = h(r) if r == r_top else h(r) - h(r + 1)
        if w > 0:
            levels.append((r, w))
    return levels
