"""The rescaled discrete noise field ξ_{N,η} and its cutoff versions."""

import logging
import math
from typing import NamedTuple, Optional

import numpy as np

from ..disorder.laws import TailLaw, truncated_moment
from ..disorder.scaling import ScalingPlan, TruncationSpec, kappa_N_a, truncate_eta
from ..lattice.environment import EnvSlab, parity_mask
from ..utils.errors import DomainError
from .bumps import BumpProduct

logger = logging.getLogger(__name__)


class VarianceCap(NamedTuple):
    """Var⟨ξ_N - ξ_N^(a), ψ⟩ = ε(a) N^{-(d/2+1)} Σψ²."""
    cap: float
    epsilon: float
    psi_square_sum: float


def _layer_range(psi: BumpProduct, N: int) -> range:
    (t_lo, t_hi), _ = psi.support()
    return range(max(1, math.floor(t_lo * N)), min(N, math.ceil(t_hi * N)) + 1)


def _reach(psi: BumpProduct, N: int, d: int) -> int:
    """Lattice radius covering the spatial support of ψ at scale √(N/d)."""
    _, (x_lo, x_hi) = psi.support()
    extent = float(max(np.abs(x_lo).max(), np.abs(x_hi).max()))
    return math.ceil(extent * math.sqrt(N / d))


def check_support(psi: BumpProduct, N: int, d: int) -> None:
    """ψ must vanish outside [0, 1] × the rescaled reach √(dN) of the slab."""
    if psi.d != d:
        raise DomainError("test function dimension does not match the slab", psi_d=psi.d, d=d)
    (t_lo, t_hi), _ = psi.support()
    if t_lo < 0.0 or t_hi > 1.0:
        raise DomainError("test function support overflows the slab in time", support=psi.describe())
    if _reach(psi, N, d) > N:
        raise DomainError("test function support overflows the slab in space", support=psi.describe(), N=N)


def _psi_layer(psi: BumpProduct, n: int, r: int, N: int, d: int) -> np.ndarray:
    grid = np.moveaxis(np.indices((2 * r + 1,) * d) - r, 0, -1).reshape(-1, d)
    values = psi(np.full(grid.shape[0], n / N), grid / math.sqrt(N / d)).reshape((2 * r + 1,) * d)
    return np.where(parity_mask(n, r, d), values, 0.0)


def psi_square_sum(psi: BumpProduct, N: int, d: int) -> float:
    """Σ_{(n,x)∈H_d} ψ(n/N, x/√(N/d))²."""
    check_support(psi, N, d)
    r_psi = _reach(psi, N, d)
    return float(sum(np.sum(_psi_layer(psi, n, min(n, r_psi), N, d) ** 2) for n in _layer_range(psi, N)))


def _field_sum(env: EnvSlab, psi: BumpProduct, transform, shift: float = 0.0) -> float:
    """Σ_{(n,x)} (transform(η) - shift) ψ(n/N, x/√(N/d)) over reachable sites."""
    N, d = env.N, env.d
    r_psi = _reach(psi, N, d)
    total = 0.0
    for n in _layer_range(psi, N):
        r = min(n, r_psi)
        weights = _psi_layer(psi, n, r, N, d)
        values = transform(env.layer(n, r)) - shift
        total += float(np.sum(values * weights))
    return total


def alpha_one_shift(law: TailLaw, V_N: float) -> float:
    """E[η 1{η ≤ V_N}] at α = 1, 0 otherwise."""
    if not math.isclose(law.alpha, 1.0):
        return 0.0
    return truncated_moment(law, 1.0 + V_N, 1).exact


def xi_discrete_pair(env: EnvSlab, psi: BumpProduct, plan: ScalingPlan, a: float = 0.0) -> float:
    """
    ⟨ξ^(a)_{N,η}, ψ⟩ = V_N^{-1} Σ_{(n,x)∈H_d} (η^(a)_{n,x} - E[η1{η≤V_N}]1{α=1}) ψ(n/N, x/√(N/d)).

    Args:
        env: Disorder slab of the plan's N and d
        psi: Test function
        plan: Scaling plan supplying V_N
        a: Cutoff; a = 0 pairs the untruncated field

    Raises:
        DomainError: If ψ's support overflows the slab
    """
    if env.N != plan.N or env.d != plan.d:
        raise DomainError("slab does not match the scaling plan", N=env.N, d=env.d)
    check_support(psi, env.N, env.d)
    if psi.is_zero:
        return 0.0
    spec = plan.truncation(a) if a > 0 else TruncationSpec.none()
    shift = alpha_one_shift(plan.law, plan.V_N)
    transform = (lambda v: v) if spec.is_identity else (lambda v: truncate_eta(v, spec, plan.V_N))
    return _field_sum(env, psi, transform, shift) / plan.V_N


def cutoff_spec(law: TailLaw, V_N: float, a: float) -> TruncationSpec:
    """η^(a) cutoff at scale V_N without reference to a disorder strength."""
    kappa = 0.0
    if a > 0 and a * V_N > law.x_m:
        kappa = kappa_N_a(law, a, V_N)
    return TruncationSpec(a=a, kappa_N_a=kappa, V_N=V_N)


def xi_difference_pair(env: EnvSlab, psi: BumpProduct, V_N: float, spec: TruncationSpec) -> float:
    """⟨ξ_{N,η} - ξ^(a)_{N,η}, ψ⟩ = V_N^{-1} Σ (η - η^(a)) ψ."""
    return _field_sum(env, psi, lambda v: v - truncate_eta(v, spec, V_N)) / V_N


def difference_variance(law: TailLaw, spec: TruncationSpec) -> float:
    """Var(η - η^(a)) where η - η^(a) = (η + κ_N^(a)) 1{1+η < aV_N}."""
    u = spec.a * spec.V_N
    if u <= law.x_m:
        return 0.0
    p = law.power_moment(u, 0)
    m1 = truncated_moment(law, u, 1).exact
    m2 = truncated_moment(law, u, 2).exact
    kappa = spec.kappa_N_a
    first = m1 + kappa * p
    second = m2 + 2.0 * kappa * m1 + kappa**2 * p
    return max(second - first**2, 0.0)


def variance_cap(law: TailLaw, psi: BumpProduct, N: int, d: int, spec: TruncationSpec, square_sum: Optional[float] = None) -> VarianceCap:
    """Closed-form Var⟨ξ_N - ξ_N^(a), ψ⟩ with its ε(a) = N^{d/2+1} V_N^{-2} Var(η - η^(a))."""
    square_sum = psi_square_sum(psi, N, d) if square_sum is None else square_sum
    var = difference_variance(law, spec) / spec.V_N**2
    return VarianceCap(var * square_sum, var * float(N) ** (d / 2.0 + 1.0), square_sum)
