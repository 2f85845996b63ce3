"""Simple random walk transition kernels on Z^d."""

from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from ..utils.errors import DomainError
from .environment import centered_slice

# (axis, sign) -> weight array aligned with the source layer, or None for unit weights
StepWeight = Callable[[int, int], Optional[np.ndarray]]


def spread(u: np.ndarray, d: int, step_weight: Optional[StepWeight] = None) -> np.ndarray:
    """
    One walk step: array over [-r, r]^d to array over [-(r+1), r+1]^d.

    out(y) = (2d)^{-1} Σ_e u(y - e) w_e(y - e). Leading batch axes are allowed;
    the last ``d`` axes are spatial.
    """
    batch = u.ndim - d
    pad = [(0, 0)] * batch + [(1, 1)] * d
    out = np.zeros(u.shape[:batch] + tuple(s + 2 for s in u.shape[batch:]))
    for k in range(d):
        axis = batch + k
        for sign in (1, -1):
            src = u
            if step_weight is not None:
                w = step_weight(k, sign)
                if w is not None:
                    src = u * w
            out += np.roll(np.pad(src, pad), sign, axis=axis)
    return out / (2.0 * d)


def crop(u: np.ndarray, d: int, radius: int) -> np.ndarray:
    """Restrict the spatial box of ``u`` to [-radius, radius]^d (kills the rest)."""
    r = (u.shape[-1] - 1) // 2
    if radius >= r:
        return u
    return u[(Ellipsis,) + centered_slice(r, radius, d)]


@lru_cache(maxsize=64)
def _walk_distribution(n: int, d: int) -> np.ndarray:
    u = np.ones((1,) * d)
    for _ in range(n):
        u = spread(u, d)
    u.setflags(write=False)
    return u


def walk_distribution(n: int, d: int) -> np.ndarray:
    """Law of S_n over [-n, n]^d by DP convolution."""
    if n < 0:
        raise DomainError("walk length must be >= 0", n=n)
    return _walk_distribution(int(n), int(d))


def _binomial_kernel(n: np.ndarray, x: np.ndarray) -> np.ndarray:
    """d=1 point mass C(n, (n+x)/2) 2^{-n}, 0 off parity or out of range."""
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    ok = (np.abs(x) <= n) & (np.mod(n + x, 2) == 0) & (n >= 0)
    k = np.where(ok, (n + x) / 2.0, 0.0)
    nn = np.where(ok, n, 0.0)
    logp = gammaln(nn + 1) - gammaln(k + 1) - gammaln(nn - k + 1) - nn * np.log(2.0)
    return np.where(ok, np.exp(logp), 0.0)


def walk_kernel_array(n, x, d: int) -> np.ndarray:
    """
    p_n(x) for arrays of times ``n`` (shape (M,)) and points ``x`` (shape (M, d)).

    d=1 uses the binomial form and d=2 the rotation to two independent
    one-dimensional walks; d ≥ 3 reads the DP distribution.
    """
    n = np.asarray(n, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64).reshape(n.shape + (d,))
    if d == 1:
        return _binomial_kernel(n, x[..., 0])
    if d == 2:
        return _binomial_kernel(n, x[..., 0] + x[..., 1]) * _binomial_kernel(n, x[..., 0] - x[..., 1])
    out = np.zeros(n.shape)
    for idx in np.ndindex(n.shape):
        m = int(n[idx])
        pt = x[idx]
        if m < 0 or np.abs(pt).max() > m:
            continue
        out[idx] = walk_distribution(m, d)[tuple(pt + m)]
    return out


def walk_kernel(n: int, x, d: int) -> float:
    """P(S_n = x) for the simple random walk on Z^d; 0 off parity."""
    if n < 0:
        raise DomainError("walk length must be >= 0", n=n)
    pt = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if pt.shape != (d,):
        raise DomainError("point dimension mismatch", x=list(pt), d=d)
    return float(walk_kernel_array(np.array([n]), pt.reshape(1, d), d)[0])
