"""Pairings of the truncated stable noise ξ_ω^(a) with test functions."""

import logging

import numpy as np

from ..disorder.scaling import kappa_a
from ..lab.bumps import BumpProduct
from ..utils.errors import DomainError
from .cloud import PoissonCloud

logger = logging.getLogger(__name__)


def pair_noise(cloud: PoissonCloud, psi: BumpProduct, alpha: float, a: float) -> float:
    """
    ⟨ξ_ω^(a), ψ⟩ = Σ_{υ≥a} υ ψ(t, x) - κ_a ∫ψ.

    Raises:
        DomainError: If ψ's support leaves the cloud window, or a is below the cloud floor
    """
    if a < cloud.a:
        raise DomainError("cutoff below the cloud's weight floor", a=a, floor=cloud.a)
    if psi.d != cloud.d:
        raise DomainError("test function dimension does not match the cloud", psi_d=psi.d, cloud_d=cloud.d)
    (t_lo, t_hi), (x_lo, x_hi) = psi.support()
    if t_lo < 0.0 or t_hi > 1.0 or np.any(x_lo < cloud.center - cloud.L) or np.any(x_hi > cloud.center + cloud.L):
        raise DomainError("window too small for the test function support", L=cloud.L, support=psi.describe())
    if psi.is_zero:
        return 0.0
    keep = cloud.v >= a
    total = float(np.sum(cloud.v[keep] * psi(cloud.t[keep], cloud.x[keep])))
    kappa = kappa_a(alpha, a)
    if kappa:
        total -= kappa * psi.integral()
    return total
