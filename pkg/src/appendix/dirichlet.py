"""Dirichlet-type integrals over ordered times.

    ∫_{0<s_1<...<s_k<t} Π_{i=1}^{k+1} (s_i - s_{i-1})^{ζ_i - 1} ds = t^{Σζ-1} Π Γ(ζ_i) / Γ(Σζ)

with s_0 = 0 and s_{k+1} = t.
"""

import logging
import math
from typing import List, Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import gammaln, roots_jacobi

from ..config import GAUSS_JACOBI_NODES
from ..utils.errors import DomainError
from ..utils.rng import Stream, StreamKey, generator

logger = logging.getLogger(__name__)

MAX_QUADRATURE_K = 6
_MC_CHUNK = 1 << 16


class DirichletSpec(BaseModel):
    """Chain length k, exponents ζ_1..ζ_{k+1} and horizon t."""

    model_config = ConfigDict(frozen=True)

    k: int
    zetas: List[float]
    t: float = 1.0

    @model_validator(mode="after")
    def _check(self) -> "DirichletSpec":
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.zetas) != self.k + 1:
            raise ValueError("need exactly k+1 exponents")
        if any(z <= 0 for z in self.zetas):
            raise ValueError("exponents must be positive")
        if self.t <= 0:
            raise ValueError("t must be positive")
        return self


class DirichletResult(NamedTuple):
    numeric: float
    formula: float
    std_error: float
    method: str

    @property
    def relative_error(self) -> float:
        return abs(self.numeric - self.formula) / abs(self.formula)


def gamma_formula(spec: DirichletSpec) -> float:
    z = np.asarray(spec.zetas)
    total = z.sum()
    return float(np.exp((total - 1.0) * math.log(spec.t) + gammaln(z).sum() - gammaln(total)))


def _log_integrand(gaps: np.ndarray, zetas: np.ndarray) -> np.ndarray:
    return np.sum((zetas[None, :] - 1.0) * np.log(gaps), axis=1)


def _quadrature(spec: DirichletSpec) -> float:
    """
    Stick-breaking s_i = t Π_{j≥i} v_j onto [0,1]^k with one Gauss-Jacobi rule per v_m.

    The rule for v_m carries the weight v^{Σ_{i≤m}ζ_i - 1}(1-v)^{ζ_{m+1}-1}; the
    original integrand times the Jacobian t^k Π v_j^{j-1} is divided by those
    weights and evaluated at the nodes.
    """
    k, t = spec.k, spec.t
    z = np.asarray(spec.zetas, dtype=float)
    cum = np.cumsum(z)
    axes_v, axes_w, log_weight_fns = [], [], []
    for m in range(1, k + 1):
        p, q = cum[m - 1] - 1.0, z[m] - 1.0
        x, w = roots_jacobi(GAUSS_JACOBI_NODES, q, p)
        axes_v.append((1.0 + x) / 2.0)
        axes_w.append(w * 2.0 ** (-(p + q + 1.0)))
        log_weight_fns.append((p, q))

    grids = np.meshgrid(*axes_v, indexing="ij")
    v = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(v.shape[0])
    for g in np.meshgrid(*axes_w, indexing="ij"):
        weights = weights * g.ravel()

    # s_i = t Π_{j≥i} v_j, column i-1 holds s_i
    s = t * np.cumprod(v[:, ::-1], axis=1)[:, ::-1]
    padded = np.hstack([np.zeros((v.shape[0], 1)), s, np.full((v.shape[0], 1), t)])
    gaps = np.diff(padded, axis=1)

    log_f = _log_integrand(gaps, z)
    log_jac = k * math.log(t) + np.sum(np.log(v) * np.arange(k)[None, :], axis=1)
    log_w = np.zeros(v.shape[0])
    for m, (p, q) in enumerate(log_weight_fns):
        log_w = log_w + p * np.log(v[:, m]) + q * np.log1p(-v[:, m])
    return float(np.sum(weights * np.exp(log_f + log_jac - log_w)))


def _monte_carlo(spec: DirichletSpec, samples: int, rng_key: StreamKey) -> tuple:
    """Uniform points on the ordered simplex; finite variance needs every ζ_i > 1/2."""
    k, t = spec.k, spec.t
    z = np.asarray(spec.zetas, dtype=float)
    if np.any(z <= 0.5):
        logger.warning("Monte-Carlo Dirichlet estimate has infinite variance for zeta <= 1/2")
    gen = generator(rng_key.child(Stream.APPENDIX))
    volume = t**k / math.factorial(k)
    total, total_sq, done = 0.0, 0.0, 0
    while done < samples:
        n = min(_MC_CHUNK, samples - done)
        gaps = gen.dirichlet(np.ones(k + 1), size=n) * t
        vals = np.exp(_log_integrand(np.maximum(gaps, np.finfo(float).tiny), z))
        total += vals.sum()
        total_sq += np.sum(vals**2)
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    return volume * mean, volume * math.sqrt(var / samples)


def dirichlet_identity(
    spec: DirichletSpec,
    method: Literal["auto", "quadrature", "monte_carlo"] = "auto",
    samples: int = 10**6,
    rng_key: Optional[StreamKey] = None,
) -> DirichletResult:
    """
    Numeric value of the ordered-time integral next to its Gamma-function closed form.

    Quadrature is used up to k = 6; larger k (or method="monte_carlo") needs ``rng_key``.
    """
    if method == "auto":
        method = "quadrature" if spec.k <= MAX_QUADRATURE_K else "monte_carlo"
    formula = gamma_formula(spec)
    if method == "quadrature":
        if spec.k > MAX_QUADRATURE_K:
            raise DomainError("tensor quadrature limited to k <= 6", k=spec.k)
        return DirichletResult(_quadrature(spec), formula, 0.0, "quadrature")
    if method != "monte_carlo":
        raise DomainError("unknown method", method=method)
    if rng_key is None:
        raise DomainError("Monte-Carlo Dirichlet estimates need an rng_key")
    value, se = _monte_carlo(spec, samples, rng_key)
    return DirichletResult(value, formula, se, "monte_carlo")
