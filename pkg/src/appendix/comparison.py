"""Stochastic comparison inequalities between the disorder law μ of X = 1+η and its tail density.

increasing:  E_μ^{⊗k}[f 1{X < B}] ≤ C^k ∫_{[0,2B)^k} f(u) Π u_i^{-(1+α)} φ(u_i) du
             for coordinatewise non-decreasing f with f(0) = 0
decreasing:  ∫ f Π u_i² μ(du_i) ≤ C^k ∫ f(u) Π u_i^{1-α} φ(u_i) du
             for non-increasing f of bounded support

Both are checked on product functionals, for which every side factors over
coordinates; the constant C is calibrated once per law at k = 1.

Both right sides use the exact slowly varying part φ(u) = u^α P(X > u)
(``TailLaw.phi_exact``). It agrees with the declared φ on [x_m, ∞); below x_m
the declared constant would make the increasing side diverge for α ≥ 1.
"""

import itertools
import logging
import math
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import integrate

from ..config import COMPARISON_CALIBRATION_MARGIN, QUADRATURE_RTOL
from ..disorder.laws import TailLaw, sample_eta_array
from ..utils.errors import DomainError
from ..utils.rng import Stream, StreamKey, generator, uniforms

logger = logging.getLogger(__name__)

B_GRID = (10.0, 20.0, 50.0, 100.0)
CAP_FRACTIONS = (0.1, 0.5, 1.0)
T_GRID = (2.0, 5.0, 10.0, 50.0, 100.0)


class RampProduct(BaseModel):
    """f(u) = amplitude · Π_i min(u_i, caps_i)."""

    model_config = ConfigDict(frozen=True)

    caps: List[float]
    amplitude: float = 1.0

    @field_validator("caps")
    @classmethod
    def _nonnegative(cls, v: List[float]) -> List[float]:
        if not v or any(c < 0 for c in v):
            raise ValueError("caps must be a non-empty list of values >= 0")
        return v

    @property
    def k(self) -> int:
        return len(self.caps)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.amplitude * np.prod(np.minimum(u, np.asarray(self.caps)[None, :]), axis=1)


class StepProduct(BaseModel):
    """f(u) = amplitude · Π_i 1{u_i < thresholds_i}."""

    model_config = ConfigDict(frozen=True)

    thresholds: List[float]
    amplitude: float = 1.0

    @field_validator("thresholds")
    @classmethod
    def _positive(cls, v: List[float]) -> List[float]:
        if not v or any(t <= 0 for t in v):
            raise ValueError("thresholds must be a non-empty list of positive values")
        return v

    @property
    def k(self) -> int:
        return len(self.thresholds)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.amplitude * np.all(u < np.asarray(self.thresholds)[None, :], axis=1).astype(float)


class ComparisonReport(NamedTuple):
    check: str
    k: int
    params: Dict
    lhs: float
    lhs_exact: float
    lhs_se: float
    rhs: float
    constant: float
    passed: bool
    degenerate: bool = False

    @property
    def ratio(self) -> float:
        return self.lhs_exact / self.rhs if self.rhs > 0 else math.nan

    def to_row(self) -> dict:
        return {
            "check": self.check,
            "k": self.k,
            "params": ";".join(f"{key}={val}" for key, val in sorted(self.params.items())),
            "lhs": self.lhs,
            "lhs_exact": self.lhs_exact,
            "lhs_se": self.lhs_se,
            "rhs": self.rhs,
            "constant": self.constant,
            "pass": self.passed,
            "degenerate": self.degenerate,
        }


# -- one-coordinate pieces ---------------------------------------------------

def ramp_lhs(law: TailLaw, cap: float, B: float) -> float:
    """E[min(X, c) 1{X < B}]."""
    if cap >= B:
        return law.power_moment(B, 1)
    return law.power_moment(cap, 1) + cap * (law.power_moment(B, 0) - law.power_moment(cap, 0))


def ramp_rhs(law: TailLaw, cap: float, B: float) -> float:
    """∫_0^{2B} min(u, c) u^{-(1+α)} φ(u) du with the exact φ(u) = u^α P(X > u)."""
    if cap == 0:
        return 0.0

    def integrand(u: float) -> float:
        return min(u, cap) / u ** (1.0 + law.alpha) * float(law.phi_exact(u)) if u > 0 else 1.0

    points = sorted(p for p in {law.x_m, cap} if 0 < p < 2 * B)
    value, _ = integrate.quad(integrand, 0.0, 2 * B, points=points or None, epsrel=QUADRATURE_RTOL, limit=200)
    return float(value)


def step_lhs(law: TailLaw, T: float) -> float:
    """E[X² 1{X < T}]."""
    return law.power_moment(T, 2)


def step_rhs(law: TailLaw, T: float) -> float:
    """∫_0^T u^{1-α} φ(u) du with the exact φ(u) = u^α P(X > u), as in ``ramp_rhs``."""
    a, x_m = law.alpha, law.x_m
    if T <= x_m:
        return T * T / 2.0
    if law.family != "log_pareto":
        return x_m * x_m / 2.0 + x_m**a * (T ** (2.0 - a) - x_m ** (2.0 - a)) / (2.0 - a)
    value, _ = integrate.quad(lambda u: u ** (1.0 - a) * float(law.phi_exact(u)), x_m, T, epsrel=QUADRATURE_RTOL, limit=200)
    return x_m * x_m / 2.0 + float(value)


# -- calibration ---------------------------------------------------------------

@lru_cache(maxsize=64)
def _calibrate(law: TailLaw, kind: str) -> float:
    if kind == "increasing":
        ratios = [
            ramp_lhs(law, frac * B, B) / ramp_rhs(law, frac * B, B)
            for B in B_GRID for frac in CAP_FRACTIONS
        ]
    else:
        ratios = [step_lhs(law, T * law.x_m) / step_rhs(law, T * law.x_m) for T in T_GRID]
    return COMPARISON_CALIBRATION_MARGIN * max(ratios)


def calibrated_constant(law: TailLaw, kind: str) -> float:
    """C = margin × max of the exact k=1 ratio over the calibration grid."""
    if kind not in ("increasing", "decreasing"):
        raise DomainError("unknown comparison kind", kind=kind)
    return _calibrate(law, kind)


def calibration_table(laws: Sequence[TailLaw]) -> List[dict]:
    return [
        {"family": law.family, "alpha": law.alpha, "x_m": law.x_m,
         "C_increasing": calibrated_constant(law, "increasing"),
         "C_decreasing": calibrated_constant(law, "decreasing"),
         "B0": B_GRID[0]}
        for law in laws
    ]


# -- checks ----------------------------------------------------------------------

def _sample_x(law: TailLaw, k: int, samples: int, rng_key: StreamKey) -> np.ndarray:
    key = rng_key.child(Stream.APPENDIX)
    return 1.0 + sample_eta_array(law, uniforms(key, 0, samples * k)).reshape(samples, k)


def increasing_comparison_check(
    law: TailLaw,
    k: int,
    f_spec: RampProduct,
    B: float,
    samples: int,
    rng_key: StreamKey,
    constant: Optional[float] = None,
) -> ComparisonReport:
    """
    Monte-Carlo left side (with SE) against the quadrature right side for a ramp product.

    Passes when the estimate is at most C^k·rhs plus three standard errors and the
    exact left side is at most C^k·rhs.
    """
    if f_spec.k != k:
        raise DomainError("functional arity does not match k", k=k, arity=f_spec.k)
    if B <= 0:
        raise DomainError("B must be positive", B=B)
    C = calibrated_constant(law, "increasing") if constant is None else constant
    x = _sample_x(law, k, samples, rng_key)
    vals = f_spec(x) * np.all(x < B, axis=1)
    lhs = float(vals.mean())
    lhs_se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    exact = f_spec.amplitude * math.prod(ramp_lhs(law, c, B) for c in f_spec.caps)
    rhs = f_spec.amplitude * math.prod(ramp_rhs(law, c, B) for c in f_spec.caps)
    bound = C**k * rhs
    passed = exact <= bound * (1 + 1e-12) and lhs <= bound + 3.0 * lhs_se + 1e-300
    params = {"B": B, "caps": list(f_spec.caps), "amplitude": f_spec.amplitude, "family": law.family, "alpha": law.alpha}
    if not passed:
        logger.warning(f"increasing comparison violated: lhs={lhs:.6g} exact={exact:.6g} bound={bound:.6g} {params}")
    return ComparisonReport("increasing", k, params, lhs, exact, lhs_se, rhs, C, passed)


def decreasing_comparison_check(
    law: TailLaw,
    k: int,
    f_spec: StepProduct,
    samples: int = 0,
    rng_key: Optional[StreamKey] = None,
    constant: Optional[float] = None,
) -> ComparisonReport:
    """
    Closed-form check of the decreasing comparison for a step product.

    A Monte-Carlo estimate of the left side is attached when ``samples`` > 0.
    Thresholds at or below the support's lower end x_m give a degenerate report.
    """
    if f_spec.k != k:
        raise DomainError("functional arity does not match k", k=k, arity=f_spec.k)
    C = calibrated_constant(law, "decreasing") if constant is None else constant
    degenerate = any(T <= law.x_m for T in f_spec.thresholds)
    exact = f_spec.amplitude * math.prod(step_lhs(law, T) for T in f_spec.thresholds)
    rhs = f_spec.amplitude * math.prod(step_rhs(law, T) for T in f_spec.thresholds)
    lhs, lhs_se = exact, 0.0
    if samples > 1:
        if rng_key is None:
            raise DomainError("Monte-Carlo left side needs an rng_key")
        x = _sample_x(law, k, samples, rng_key)
        vals = f_spec(x) * np.prod(x**2, axis=1)
        lhs = float(vals.mean())
        lhs_se = float(vals.std(ddof=1) / math.sqrt(samples))
    passed = exact <= C**k * rhs * (1 + 1e-12)
    params = {"thresholds": list(f_spec.thresholds), "amplitude": f_spec.amplitude, "family": law.family, "alpha": law.alpha}
    if degenerate:
        logger.warning(f"decreasing comparison: threshold below the support, {params}")
    return ComparisonReport("decreasing", k, params, lhs, exact, lhs_se, rhs, C, passed, degenerate)


def comparison_suite(
    law: TailLaw,
    ks: Sequence[int],
    configs_per_k: int,
    samples: int,
    rng_key: StreamKey,
) -> List[ComparisonReport]:
    """Random product functionals drawn from the calibration grids, checked for every k."""
    gen = generator(rng_key.child(Stream.APPENDIX).for_replica(1))
    reports = []
    ramp_params = list(itertools.product(B_GRID, CAP_FRACTIONS))
    for k in ks:
        for i in range(configs_per_k):
            B, _ = ramp_params[int(gen.integers(len(ramp_params)))]
            fracs = [CAP_FRACTIONS[int(j)] for j in gen.integers(len(CAP_FRACTIONS), size=k)]
            ramp = RampProduct(caps=[fr * B for fr in fracs])
            reports.append(increasing_comparison_check(law, k, ramp, B, samples, rng_key.for_replica(1000 * k + i)))
            steps = StepProduct(thresholds=[T_GRID[int(j)] * law.x_m for j in gen.integers(len(T_GRID), size=k)])
            reports.append(decreasing_comparison_check(law, k, steps))
    return reports
