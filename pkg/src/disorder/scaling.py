"""Intermediate-disorder scaling constants and environment truncation."""

import logging
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..config import alpha_critical
from ..utils.errors import DomainError, ValidationError
from .laws import TailLaw, truncated_moment

logger = logging.getLogger(__name__)


def kappa_a(alpha: float, a: float) -> float:
    """Continuum centering κ_a: 0 (α<1), log(1/a) (α=1), α/(α-1) a^{1-α} (α∈(1,2))."""
    if a <= 0:
        raise DomainError("cutoff a must be positive", a=a)
    if alpha < 1.0:
        return 0.0
    if math.isclose(alpha, 1.0):
        return math.log(1.0 / a)
    return alpha / (alpha - 1.0) * a ** (1.0 - alpha)


def kappa_a_shifted(alpha: float, a: float) -> float:
    """Alternative centering κ'_a = α/(α-1)(a^{1-α} - 1); equals log(1/a) at α=1."""
    if a <= 0:
        raise DomainError("cutoff a must be positive", a=a)
    if math.isclose(alpha, 1.0):
        return math.log(1.0 / a)
    return alpha / (alpha - 1.0) * (a ** (1.0 - alpha) - 1.0)


def disorder_scale(law: TailLaw, N: int, d: int) -> float:
    """V_N: the level exceeded with probability 2 d^{d/2} N^{-(1+d/2)}."""
    if law.family == "log_pareto":
        u = 2.0 * d ** (d / 2.0) * float(N) ** (-(1.0 + d / 2.0))
        return law.inverse_tail(u)
    return law.x_m * (2.0 * d ** (d / 2.0)) ** (-1.0 / law.alpha) * float(N) ** ((1.0 + d / 2.0) / law.alpha)


def kappa_N_a(law: TailLaw, a: float, V_N: float) -> float:
    """Discrete centering κ_N^(a) = -E[η | 1+η < aV_N] for α ∈ [1,2), else 0."""
    if law.alpha < 1.0:
        return 0.0
    u = a * V_N
    if u <= law.x_m:
        raise DomainError("empty truncation band: a*V_N <= x_m", a=a, V_N=V_N, x_m=law.x_m)
    m1 = truncated_moment(law, u, 1).exact
    return -m1 / law.power_moment(u, 0)


def gamma_N(law: TailLaw, N: int, d: int) -> float:
    """α=1 normalization (2d^{d/2})^{-1} N^{1+d/2} V_N^{-1} E[η 1{1+η ≤ V_N}]."""
    if not math.isclose(law.alpha, 1.0):
        raise DomainError("gamma_N only defined at alpha=1", alpha=law.alpha)
    V_N = disorder_scale(law, N, d)
    m1 = truncated_moment(law, V_N, 1).exact
    return float(N) ** (1.0 + d / 2.0) / (2.0 * d ** (d / 2.0)) / V_N * m1


class TruncationSpec(BaseModel):
    """Two-sided cutoff [aV_N, bV_N) with sub-threshold replacement -κ_N^(a)."""

    model_config = ConfigDict(frozen=True)

    a: float = 0.0
    b: float = math.inf
    kappa_N_a: float = 0.0
    V_N: float = 1.0

    @model_validator(mode="after")
    def _check_band(self) -> "TruncationSpec":
        if self.a < 0:
            raise ValueError("a must be >= 0")
        if not self.b > self.a:
            raise ValueError("truncation requires a < b")
        if self.V_N <= 0:
            raise ValueError("V_N must be positive")
        return self

    @classmethod
    def none(cls) -> "TruncationSpec":
        """Identity truncation (a=0, b=∞)."""
        return cls()

    @property
    def is_identity(self) -> bool:
        return self.a == 0.0 and math.isinf(self.b)

    def describe(self) -> str:
        return f"[{self.a:g},{self.b:g})"


def truncate_eta(eta, spec: TruncationSpec, V_N: Optional[float] = None):
    """
    Apply the [a, b) cutoff to η.

    Returns -κ_N^(a) where 1+η < aV_N, η where 1+η ∈ [aV_N, bV_N), and 0
    where 1+η ≥ bV_N. Works on scalars and arrays.
    """
    scale = spec.V_N if V_N is None else V_N
    eta = np.asarray(eta, dtype=float)
    x = 1.0 + eta
    out = np.where(x < spec.b * scale, eta, 0.0)
    out = np.where(x < spec.a * scale, -spec.kappa_N_a, out)
    return float(out) if out.ndim == 0 else out


class ScalingPlan(BaseModel):
    """All intermediate-disorder constants for one (law, N, d, β̂)."""

    model_config = ConfigDict(frozen=True)

    law: TailLaw
    N: int
    d: int
    beta_hat: float
    V_N: float
    beta_N: float
    gamma_N: float = 0.0

    @field_validator("N", "d")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @classmethod
    def build(cls, law: TailLaw, N: int, d: int, beta_hat: float) -> "ScalingPlan":
        """
        Compute V_N, β_N and γ_N, enforcing α < α_c(d) and β_N ∈ (0, 1).

        Raises:
            ValidationError: when the law is outside the regime or β_N ∉ (0, 1)
        """
        if beta_hat <= 0:
            raise ValidationError("beta_hat must be positive", field="beta_hat")
        alpha_c = alpha_critical(d)
        if law.alpha >= alpha_c:
            raise ValidationError(
                f"alpha={law.alpha} is not below alpha_c(d) = min(1+2/d, 2) = {alpha_c:g} for d={d}; "
                "the limiting partition function is degenerate there",
                field="law.alpha",
            )
        V_N = disorder_scale(law, N, d)
        beta_N = 0.5 * beta_hat * (N / d) ** (d / 2.0) / V_N
        if not 0.0 < beta_N < 1.0:
            raise ValidationError(
                f"beta_N = {beta_N:.6g} lies outside (0, 1) for N={N}, d={d}, beta_hat={beta_hat}",
                field="disorder.beta_hat",
            )
        g = gamma_N(law, N, d) if math.isclose(law.alpha, 1.0) else 0.0
        return cls(law=law, N=N, d=d, beta_hat=beta_hat, V_N=V_N, beta_N=beta_N, gamma_N=g)

    @property
    def normalization(self) -> float:
        """e^{-β̂γ_N} at α=1, 1 otherwise."""
        return math.exp(-self.beta_hat * self.gamma_N)

    @property
    def alpha(self) -> float:
        return self.law.alpha

    def truncation(self, a: float, b: float = math.inf) -> TruncationSpec:
        """TruncationSpec for this plan; κ is 0 when no site can fall below aV_N."""
        if a < 0:
            raise DomainError("cutoff a must be >= 0", a=a)
        kappa = 0.0
        if a > 0 and a * self.V_N > self.law.x_m:
            kappa = kappa_N_a(self.law, a, self.V_N)
        return TruncationSpec(a=a, b=b, kappa_N_a=kappa, V_N=self.V_N)

    def p2p_normalization(self) -> float:
        """½(N/d)^{d/2} e^{-β̂γ_N 1{α=1}}."""
        return 0.5 * (self.N / self.d) ** (self.d / 2.0) * self.normalization


def asymptotic_ledger(law: TailLaw, d: int, beta_hat: float, N_grid: List[int], a: float) -> List[dict]:
    """
    Exact finite-N values of the scaling identities along ``N_grid``.

    Each row carries the constants and three ratios that tend to 1:
    the truncated second moment against its asymptotic form, the
    product (1-β_Nκ_N^(a))^N e^{-β̂γ_N} against e^{-β̂κ_a}, and
    β_Nκ_N^(a) N against β̂κ_a.
    """
    rows = []
    k_a = kappa_a(law.alpha, a)
    for N in N_grid:
        plan = ScalingPlan.build(law, N, d, beta_hat)
        spec = plan.truncation(a)
        m2 = truncated_moment(law, a * plan.V_N, 2).exact
        target2 = 0.5 * d ** (-d / 2.0) * beta_hat**2 * a ** (2.0 - law.alpha) * law.alpha / (2.0 - law.alpha) * N ** (d / 2.0 - 1.0)
        product = (1.0 - plan.beta_N * spec.kappa_N_a) ** N * plan.normalization
        rows.append({
            "N": N,
            "d": d,
            "V_N": plan.V_N,
            "beta_N": plan.beta_N,
            "gamma_N": plan.gamma_N,
            "kappa_N_a": spec.kappa_N_a,
            "kappa_a": k_a,
            "identity_residual": plan.beta_N * plan.V_N - 0.5 * beta_hat * (N / d) ** (d / 2.0),
            "second_moment_ratio": plan.beta_N**2 * m2 / target2,
            "product_ratio": product / math.exp(-beta_hat * k_a),
            "centering_ratio": (plan.beta_N * spec.kappa_N_a * N / (beta_hat * k_a)) if k_a > 0 else float("nan"),
        })
        logger.debug(f"ledger N={N}: {rows[-1]}")
    return rows
