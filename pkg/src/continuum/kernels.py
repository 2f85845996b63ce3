"""Gaussian heat kernels ρ_t(x) = (2πt)^{-d/2} exp(-|x|²/2t)."""

import numpy as np

from ..utils.errors import DomainError


def gaussian_kernel(t, x, d: int):
    """ρ_t(x) for scalar or array t (shape (M,)) and points x (shape (M, d) or (d,))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("kernel time must be positive")
    x = np.asarray(x, dtype=float).reshape(t.shape + (d,))
    sq = np.sum(x * x, axis=-1)
    out = (2.0 * np.pi * t) ** (-d / 2.0) * np.exp(-sq / (2.0 * t))
    return float(out) if out.ndim == 0 else out


def gaussian_kernel_matrix(t: np.ndarray, x: np.ndarray, d: int) -> np.ndarray:
    """K[i, j] = ρ_{t_j - t_i}(x_j - x_i) for t_i < t_j, else 0."""
    dt = t[None, :] - t[:, None]
    dx = x[None, :, :] - x[:, None, :]
    later = dt > 0
    safe_dt = np.where(later, dt, 1.0)
    sq = np.sum(dx * dx, axis=-1)
    out = (2.0 * np.pi * safe_dt) ** (-d / 2.0) * np.exp(-sq / (2.0 * safe_dt))
    return np.where(later, out, 0.0)


def multistep_kernel(times, points, d: int) -> float:
    """ϱ(t, x) = Π ρ_{t_i - t_{i-1}}(x_i - x_{i-1}) with t_0 = 0, x_0 = 0."""
    times = np.asarray(times, dtype=float).ravel()
    points = np.asarray(points, dtype=float).reshape(times.size, d)
    if times.size == 0:
        return 1.0
    steps = np.diff(np.concatenate([[0.0], times]))
    if np.any(steps <= 0):
        raise DomainError("kernel times must be strictly increasing and positive")
    jumps = np.diff(np.vstack([np.zeros((1, d)), points]), axis=0)
    return float(np.prod(gaussian_kernel(steps, jumps, d)))
