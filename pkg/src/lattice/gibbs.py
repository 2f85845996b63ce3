"""Exact sampling from the polymer measure P^η_{N,β} by backward DP."""

import logging
import math
from typing import List, Optional

import numpy as np

from ..disorder.scaling import TruncationSpec
from ..utils.errors import DomainError
from ..utils.rng import Stream, StreamKey, generator
from .environment import EnvSlab
from .functionals import split_time
from .partition import _directions, _truncated_layer

logger = logging.getLogger(__name__)


class RescaledPath:
    """S^(N)_t = √(d/N)((1-α_t)S_⌊Nt⌋ + α_t S_⌊Nt⌋+1) on [0, 1]."""

    def __init__(self, positions: np.ndarray, N: int, d: int):
        self.positions = np.asarray(positions)
        self.N = N
        self.d = d

    def __call__(self, t: float) -> np.ndarray:
        m, frac = split_time(t, self.N)
        scale = math.sqrt(self.d / self.N)
        if frac == 0.0:
            return scale * self.positions[m].astype(float)
        return scale * ((1.0 - frac) * self.positions[m] + frac * self.positions[m + 1])

    def at(self, times) -> np.ndarray:
        return np.stack([self(t) for t in np.atleast_1d(times)])


class WalkPath:
    """Lattice path S_0 = 0, ..., S_N."""

    def __init__(self, positions: np.ndarray):
        self.positions = np.asarray(positions, dtype=np.int64)
        self.N = self.positions.shape[0] - 1
        self.d = self.positions.shape[1]

    def rescaled(self) -> RescaledPath:
        return RescaledPath(self.positions, self.N, self.d)

    def to_dict(self) -> dict:
        return {"N": self.N, "d": self.d, "positions": self.positions.tolist()}


def rescale_path(path, N: int, d: int) -> RescaledPath:
    """Continuous interpolation of a lattice path of length N."""
    positions = path.positions if isinstance(path, WalkPath) else np.asarray(path)
    if positions.shape[0] != N + 1:
        raise DomainError("path length does not match N", length=positions.shape[0] - 1, N=N)
    return RescaledPath(positions.reshape(N + 1, d), N, d)


def _gather_neighbors(g: np.ndarray, n: int, d: int) -> np.ndarray:
    """(2d)^{-1} Σ_e g(x+e) for x in [-n, n]^d, with g given over [-(n+1), n+1]^d."""
    out = np.zeros((2 * n + 1,) * d)
    for k in range(d):
        for sign in (1, -1):
            sl = [slice(1, 2 * n + 2)] * d
            sl[k] = slice(1 + sign, 2 * n + 2 + sign)
            out += g[tuple(sl)]
    return out / (2.0 * d)


def backward_weights(env: EnvSlab, beta: float, trunc: TruncationSpec) -> List[np.ndarray]:
    """g_n(y) = (1+βη̃_{n,y}) h_n(y) for n = 1..N; entry n-1 of the list is layer n."""
    N, d = env.N, env.d
    g_layers: List[Optional[np.ndarray]] = [None] * N
    h = np.ones((2 * N + 1,) * d)
    for n in range(N, 0, -1):
        g = (1.0 + beta * _truncated_layer(env, n, n, trunc)) * h
        g_layers[n - 1] = g
        h = _gather_neighbors(g, n - 1, d)
    return g_layers


def sample_polymer_paths(
    env: EnvSlab,
    beta: float,
    trunc: Optional[TruncationSpec],
    count: int,
    rng_key: StreamKey,
) -> np.ndarray:
    """``count`` independent exact samples from P^η_{N,β}; array (count, N+1, d)."""
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)", beta=beta)
    trunc = trunc or TruncationSpec.none()
    N, d = env.N, env.d
    g_layers = backward_weights(env, beta, trunc)
    gen = generator(rng_key.child(Stream.WALK))
    dirs = _directions(d)
    paths = np.zeros((count, N + 1, d), dtype=np.int64)
    pos = np.zeros((count, d), dtype=np.int64)
    for n in range(N):
        g = g_layers[n]
        cand = pos[:, None, :] + dirs[None, :, :]
        idx = tuple(cand[..., k] + (n + 1) for k in range(d))
        w = g[idx]
        cdf = np.cumsum(w, axis=1)
        u = gen.random(count) * cdf[:, -1]
        choice = np.minimum((cdf < u[:, None]).sum(axis=1), 2 * d - 1)
        pos = pos + dirs[choice]
        paths[:, n + 1, :] = pos
    return paths


def sample_polymer_path(env: EnvSlab, beta: float, trunc: Optional[TruncationSpec], rng_key: StreamKey) -> WalkPath:
    """One exact sample from the Gibbs measure, deterministic given the key."""
    return WalkPath(sample_polymer_paths(env, beta, trunc, 1, rng_key)[0])
