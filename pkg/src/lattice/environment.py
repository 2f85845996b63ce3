"""Disorder slabs on the reachable lattice H_d.

Layer n is stored as a dense array over the box [-r, r]^d (r ≤ n) indexed by
x + r. Positions with n + |x|_1 odd cannot be visited by the walk; they hold 0
and are excluded by ``parity_mask``.
"""

import itertools
import logging
from functools import lru_cache
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from ..config import MAX_SLAB_N_HIGH_DIM
from ..disorder.laws import TailLaw, sample_eta_array
from ..utils.errors import DomainError, ResourceGuardError
from ..utils.rng import Stream, StreamKey, uniform_at, uniforms

logger = logging.getLogger(__name__)

Site = Tuple[int, Tuple[int, ...]]


@lru_cache(maxsize=512)
def _parity_mask(n: int, r: int, d: int) -> np.ndarray:
    grids = np.indices((2 * r + 1,) * d) - r
    mask = (np.abs(grids).sum(axis=0) + n) % 2 == 0
    mask.setflags(write=False)
    return mask


def parity_mask(n: int, r: int, d: int) -> np.ndarray:
    """Boolean array over [-r, r]^d marking sites reachable at time n."""
    return _parity_mask(int(n), int(r), int(d))


def layer_offset(n: int, d: int) -> int:
    """Stream index of the first site of layer n (layers start at n=1)."""
    return sum((2 * m + 1) ** d for m in range(1, n))


def site_index(n: int, x: Tuple[int, ...], d: int) -> int:
    """Stream index of site (n, x); independent of the slab length N."""
    side = 2 * n + 1
    local = int(np.ravel_multi_index(tuple(int(c) + n for c in x), (side,) * d))
    return layer_offset(n, d) + local


def centered_slice(r_from: int, r_to: int, d: int) -> Tuple[slice, ...]:
    """Slice extracting the [-r_to, r_to]^d box from an array over [-r_from, r_from]^d."""
    lo = r_from - r_to
    return (slice(lo, lo + 2 * r_to + 1),) * d


class EnvSlab:
    """Realized disorder η_{n,x} for 1 ≤ n ≤ N, |x|_∞ ≤ n."""

    def __init__(
        self,
        N: int,
        d: int,
        law: Optional[TailLaw] = None,
        key: Optional[StreamKey] = None,
        layers: Optional[Dict[int, np.ndarray]] = None,
    ):
        if N < 1 or d < 1:
            raise DomainError("slab requires N >= 1 and d >= 1", N=N, d=d)
        if layers is None and (law is None or key is None):
            raise DomainError("a lazy slab needs both a law and an rng key")
        self.N = int(N)
        self.d = int(d)
        self.law = law
        self.key = key
        self._layers = layers

    # -- construction --------------------------------------------------

    @classmethod
    def zeros(cls, N: int, d: int) -> "EnvSlab":
        return cls(N, d, layers={n: np.zeros((2 * n + 1,) * d) for n in range(1, N + 1)})

    @classmethod
    def from_values(cls, N: int, d: int, values: Dict[Site, float]) -> "EnvSlab":
        """Slab that is 0 everywhere except at the listed reachable sites."""
        slab = cls.zeros(N, d)
        for (n, x), eta in values.items():
            x = tuple(int(c) for c in np.atleast_1d(x))
            slab._check_site(n, x)
            if eta <= -1.0:
                raise DomainError("environment values must exceed -1", site=(n, x), eta=eta)
            slab._layers[n][tuple(c + n for c in x)] = float(eta)
        return slab

    def materialize(self) -> "EnvSlab":
        """Generate and keep every layer."""
        if self._layers is None:
            self._layers = {n: self._generate(n, n) for n in range(1, self.N + 1)}
        return self

    @property
    def is_materialized(self) -> bool:
        return self._layers is not None

    def map_values(self, fn) -> "EnvSlab":
        """New materialized slab with ``fn`` applied to reachable values."""
        layers = {}
        for n in range(1, self.N + 1):
            values = np.array(self.layer(n), dtype=float)
            mask = parity_mask(n, n, self.d)
            values[mask] = fn(values[mask])
            values[~mask] = 0.0
            layers[n] = values
        return EnvSlab(self.N, self.d, law=self.law, key=self.key, layers=layers)

    def with_resampled_below(self, threshold: float, key: StreamKey) -> "EnvSlab":
        """
        Hold sites with 1+η ≥ threshold and redraw the others from the law
        conditioned on 1+η < threshold.
        """
        if self.law is None:
            raise DomainError("resampling needs the slab's law")
        p_keep = float(self.law.tail_prob(threshold))
        layers = {}
        for n in range(1, self.N + 1):
            values = np.array(self.layer(n), dtype=float)
            mask = parity_mask(n, n, self.d) & (1.0 + values < threshold)
            count = int(mask.sum())
            if count:
                v = uniforms(key, layer_offset(n, self.d), values.size)[: count]
                u = p_keep + (1.0 - p_keep) * v
                values[mask] = sample_eta_array(self.law, np.minimum(u, 1.0))
            layers[n] = values
        return EnvSlab(self.N, self.d, law=self.law, key=key, layers=layers)

    # -- access ------------------------------------------------------------

    def _check_site(self, n: int, x: Tuple[int, ...]) -> None:
        if not 1 <= n <= self.N:
            raise DomainError("time index outside slab", n=n, N=self.N)
        if len(x) != self.d:
            raise DomainError("site dimension mismatch", x=x, d=self.d)
        if max(abs(c) for c in x) > n or (n + sum(abs(c) for c in x)) % 2:
            raise DomainError("site is not reachable", n=n, x=x)

    def _generate(self, n: int, r: int) -> np.ndarray:
        side = 2 * n + 1
        offset = layer_offset(n, self.d)
        if self.d == 1 and r < n:
            u = uniforms(self.key, offset + (n - r), 2 * r + 1)
            values = sample_eta_array(self.law, u)
        else:
            u = uniforms(self.key, offset, side**self.d).reshape((side,) * self.d)
            values = sample_eta_array(self.law, u)[centered_slice(n, r, self.d)]
        values = np.where(parity_mask(n, r, self.d), values, 0.0)
        return values

    def layer(self, n: int, radius: Optional[int] = None) -> np.ndarray:
        """Values of layer n over [-r, r]^d with r = min(n, radius)."""
        if not 1 <= n <= self.N:
            raise DomainError("time index outside slab", n=n, N=self.N)
        r = n if radius is None else max(0, min(n, int(radius)))
        if self._layers is not None:
            full = self._layers[n]
            return full if r == n else full[centered_slice(n, r, self.d)]
        return self._generate(n, r)

    def site_value(self, n: int, x) -> float:
        """η_{n,x} in O(1)."""
        x = tuple(int(c) for c in np.atleast_1d(x))
        self._check_site(n, x)
        if self._layers is not None:
            return float(self._layers[n][tuple(c + n for c in x)])
        u = uniform_at(self.key, site_index(n, x, self.d))
        return float(sample_eta_array(self.law, np.array([u]))[0])

    def sites(self) -> Iterator[Tuple[int, Tuple[int, ...], float]]:
        """Reachable sites (n, x, η) in lexicographic order."""
        for n in range(1, self.N + 1):
            values = self.layer(n)
            mask = parity_mask(n, n, self.d)
            for idx in itertools.product(range(2 * n + 1), repeat=self.d):
                if mask[idx]:
                    yield n, tuple(i - n for i in idx), float(values[idx])

    def site_count(self) -> int:
        return sum(int(parity_mask(n, n, self.d).sum()) for n in range(1, self.N + 1))


def sample_env_slab(law: TailLaw, N: int, d: int, rng_key: StreamKey, materialize: bool = True) -> EnvSlab:
    """
    I.i.d. disorder on every reachable site of the N-step box.

    Args:
        law: Disorder law
        N: Number of steps
        d: Spatial dimension
        rng_key: Stream key; the environment stream is used
        materialize: Generate all layers now (otherwise layers are drawn on access)

    Returns:
        EnvSlab reproducible from the key

    Raises:
        ResourceGuardError: for d >= 3 slabs longer than the configured cap
    """
    if d >= 3 and N > MAX_SLAB_N_HIGH_DIM:
        raise ResourceGuardError(
            f"d={d} slab with N={N} exceeds the configured cap",
            limit=MAX_SLAB_N_HIGH_DIM,
            requested=N,
        )
    key = rng_key if rng_key.stream == Stream.ENVIRONMENT else rng_key.child(Stream.ENVIRONMENT)
    slab = EnvSlab(N, d, law=law, key=key)
    if materialize:
        slab.materialize()
    return slab
