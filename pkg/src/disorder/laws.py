"""Heavy-tailed disorder laws P(1+η > z) = φ(z) z^{-α}.

Three families are supported:

- ``pareto``: x_m = 1, φ ≡ 1. E[η] = ∞ for α ≤ 1.
- ``centered_pareto``: x_m = (α-1)/α so that E[1+η] = 1, α ∈ (1,2).
- ``log_pareto``: P(1+η > z) = (x_m/z)^α / (1 + log(z/x_m)), a logarithmically
  perturbed tail used for stress tests. Centered through x_m when α ∈ (1,2).

All closed forms are written in terms of X = 1+η.
"""

import logging
import math
from typing import Any, Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import integrate, special

from ..config import QUADRATURE_RTOL
from ..utils.errors import DomainError

logger = logging.getLogger(__name__)

Family = Literal["pareto", "centered_pareto", "log_pareto"]


def _default_x_m(family: str, alpha: float) -> float:
    if family == "pareto":
        return 1.0
    if family == "centered_pareto":
        return (alpha - 1.0) / alpha
    # log_pareto: E[X] = x_m (1 + e^s E1(s)) with s = α - 1
    if alpha > 1.0:
        s = alpha - 1.0
        return 1.0 / (1.0 + math.exp(s) * float(special.exp1(s)))
    return 1.0


class TailLaw(BaseModel):
    """A regularly varying disorder law with exact tail and inverse."""

    model_config = ConfigDict(frozen=True)

    family: Family
    alpha: float
    x_m: float = 0.0
    uncentered: bool = False

    @model_validator(mode="before")
    @classmethod
    def _fill_x_m(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        family = data.get("family")
        alpha = data.get("alpha")
        if family is None or alpha is None:
            return data
        alpha = float(alpha)
        if not 0.0 < alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
        if family == "centered_pareto" and not 1.0 < alpha < 2.0:
            raise ValueError("centered_pareto requires alpha in (1, 2)")
        if family == "pareto" and alpha > 1.0 and not data.get("uncentered", False):
            raise ValueError(
                "pareto with alpha in (1, 2) has E[eta] != 0; use centered_pareto "
                "or set uncentered=true (diagnostics only)"
            )
        expected = _default_x_m(family, alpha)
        given = data.get("x_m")
        if given not in (None, 0.0) and not math.isclose(float(given), expected, rel_tol=1e-12):
            raise ValueError(f"x_m is fixed by the family to {expected}, got {given}")
        return {**data, "alpha": alpha, "x_m": expected}

    @property
    def is_centered(self) -> bool:
        """True when E[η] = 0 exactly."""
        return self.alpha > 1.0 and self.family in ("centered_pareto", "log_pareto")

    # -- tail and inverse -------------------------------------------------

    def tail_prob(self, z):
        """P(1+η > z), vectorized; 1 at z ≤ x_m."""
        z = np.asarray(z, dtype=float)
        ratio = np.where(z > self.x_m, self.x_m / np.where(z > 0, z, 1.0), 1.0)
        out = ratio**self.alpha
        if self.family == "log_pareto":
            log_z = np.log(np.where(z > self.x_m, z / self.x_m, 1.0))
            out = out / (1.0 + log_z)
        out = np.where(z > self.x_m, out, 1.0)
        return float(out) if out.ndim == 0 else out

    def inverse_tail(self, u):
        """z with P(1+η > z) = u for u ∈ (0, 1); analytic continuation for u ≥ 1."""
        u = np.asarray(u, dtype=float)
        if self.family == "log_pareto":
            arg = self.alpha * math.exp(self.alpha) / np.maximum(u, 1e-300)
            w = np.real(special.lambertw(arg, 0))
            out = self.x_m * np.exp(w / self.alpha - 1.0)
        else:
            out = self.x_m * u ** (-1.0 / self.alpha)
        return float(out) if out.ndim == 0 else out

    def phi(self, z):
        """Declared slowly varying part, extended by its value at x_m below the support."""
        z = np.asarray(z, dtype=float)
        out = np.full_like(z, self.x_m**self.alpha)
        if self.family == "log_pareto":
            out = out / (1.0 + np.log(np.maximum(z, self.x_m) / self.x_m))
        return float(out) if out.ndim == 0 else out

    def phi_exact(self, z):
        """z^α · P(1+η > z): the slowly varying part satisfying the tail identity for every z."""
        z = np.asarray(z, dtype=float)
        out = z**self.alpha * self.tail_prob(z)
        return float(out) if np.ndim(out) == 0 else out

    # -- moments -----------------------------------------------------------

    def power_moment(self, u: float, k: int) -> float:
        """E[(1+η)^k 1{1+η < u}] for k ∈ {0, 1, 2}."""
        if k not in (0, 1, 2):
            raise DomainError("power moment order must be 0, 1 or 2", k=k)
        if u <= self.x_m:
            return 0.0
        if math.isinf(u):
            if k == 0:
                return 1.0
            if k >= self.alpha:
                return math.inf
        if self.family == "log_pareto":
            return self._log_power_moment(u, k)
        a, xm = self.alpha, self.x_m
        if math.isinf(u):
            return a * xm**k / (a - k)
        if k == 0:
            return 1.0 - (xm / u) ** a
        if math.isclose(k, a):
            return a * xm**a * math.log(u / xm)
        return a * xm**a * (u ** (k - a) - xm ** (k - a)) / (k - a)

    def upper_power_moment(self, u: float, k: int) -> float:
        """E[(1+η)^k 1{1+η ≥ u}]; finite only for k < α."""
        if k >= self.alpha and k > 0:
            return math.inf
        if u <= self.x_m:
            return self.power_moment(math.inf, k)
        if self.family == "log_pareto":
            return self.power_moment(math.inf, k) - self.power_moment(u, k)
        a, xm = self.alpha, self.x_m
        return a * xm**a * u ** (k - a) / (a - k)

    def _log_power_moment(self, u: float, k: int) -> float:
        a, xm = self.alpha, self.x_m
        if k == 0:
            if math.isinf(u):
                return 1.0
            log_u = math.log(u / xm)
            return 1.0 - math.exp(-a * log_u) / (1.0 + log_u)

        def integrand(ell: float) -> float:
            return (xm**k) * math.exp((k - a) * ell) / (1.0 + ell) * (a + 1.0 / (1.0 + ell))

        upper = math.inf if math.isinf(u) else math.log(u / xm)
        value, abserr = integrate.quad(integrand, 0.0, upper, epsrel=QUADRATURE_RTOL, limit=200)
        logger.debug(f"log_pareto moment k={k} u={u}: {value} (abserr {abserr})")
        return float(value)


class TruncatedMoment(NamedTuple):
    """Exact truncated moment with the regular-variation leading term."""
    exact: float
    leading: Optional[float]
    degenerate: bool = False


def tail_prob(law: TailLaw, z):
    """P(1+η > z) under ``law``."""
    if np.any(np.asarray(z) < 0):
        raise DomainError("tail_prob requires z >= 0")
    return law.tail_prob(z)


def sample_eta(law: TailLaw, uniform):
    """
    Inverse-transform sample of η from a uniform in (0, 1).

    Args:
        law: Disorder law
        uniform: Scalar or array of uniforms strictly inside (0, 1)

    Returns:
        η with P(1+η > 1+η(u)) = u
    """
    u = np.asarray(uniform, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DomainError("uniform must lie strictly inside (0, 1)")
    return law.inverse_tail(u) - 1.0


def sample_eta_array(law: TailLaw, uniforms: np.ndarray) -> np.ndarray:
    """Unchecked vectorized sampler for uniforms already known to lie in (0, 1]."""
    return law.inverse_tail(uniforms) - 1.0


def truncated_moment(law: TailLaw, u: float, p: int) -> TruncatedMoment:
    """
    E[η^p 1{1+η < u}] together with its asymptotic leading term.

    The leading term is (α/(1-α)) u^{1-α} φ(u) for p=1 (None at α=1) and
    (α/(2-α)) u^{2-α} φ(u) for p=2.
    """
    if p not in (1, 2):
        raise DomainError("truncated moment order must be 1 or 2", p=p)
    if u <= law.x_m:
        return TruncatedMoment(0.0, None, degenerate=True)

    a = law.alpha
    phi_u = law.phi(u)
    if p == 1:
        if law.is_centered:
            # E[η 1{X<u}] = -E[η 1{X≥u}] avoids cancelling two numbers close to 1
            exact = -(law.upper_power_moment(u, 1) - law.upper_power_moment(u, 0))
        else:
            exact = law.power_moment(u, 1) - law.power_moment(u, 0)
        leading = None if math.isclose(a, 1.0) else a / (1.0 - a) * u ** (1.0 - a) * phi_u
    else:
        exact = law.power_moment(u, 2) - 2.0 * law.power_moment(u, 1) + law.power_moment(u, 0)
        leading = a / (2.0 - a) * u ** (2.0 - a) * phi_u
    return TruncatedMoment(float(exact), leading, degenerate=False)
