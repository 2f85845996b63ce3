"""Marked Poisson clouds ω restricted to weights ≥ a in a bounded window."""

import csv
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..utils.errors import DomainError, PolymerLabError
from ..config import ErrorCode
from ..utils.rng import Stream, StreamKey, generator

logger = logging.getLogger(__name__)


class PoissonCloud:
    """Points (t, x, υ) in [0,1] × [c-L, c+L]^d × [a, ∞), sorted by time."""

    def __init__(
        self,
        t: np.ndarray,
        x: np.ndarray,
        v: np.ndarray,
        alpha: float,
        a: float,
        L: float,
        d: int,
        center: float = 0.0,
        seed: Optional[int] = None,
    ):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float).reshape(t.size, d)
        v = np.asarray(v, dtype=float)
        if np.any(v < a):
            raise DomainError("cloud weights must be >= a", a=a)
        order = np.argsort(t, kind="stable")
        self.t, self.x, self.v = t[order], x[order], v[order]
        self.alpha = float(alpha)
        self.a = float(a)
        self.L = float(L)
        self.d = int(d)
        self.center = float(center)
        self.seed = seed

    @property
    def size(self) -> int:
        return int(self.t.size)

    @classmethod
    def empty(cls, alpha: float, a: float, L: float, d: int) -> "PoissonCloud":
        return cls(np.empty(0), np.empty((0, d)), np.empty(0), alpha, a, L, d)

    def restrict(self, a: float) -> "PoissonCloud":
        """Sub-cloud of points with weight ≥ a (a must not lie below the current floor)."""
        if a < self.a:
            raise DomainError("cannot restrict below the sampled weight floor", a=a, floor=self.a)
        keep = self.v >= a
        return PoissonCloud(self.t[keep], self.x[keep], self.v[keep], self.alpha, a, self.L, self.d, self.center, self.seed)

    def translated(self, shift: float) -> "PoissonCloud":
        return PoissonCloud(self.t, self.x + shift, self.v, self.alpha, self.a, self.L, self.d, self.center + shift, self.seed)

    def reflected(self) -> "PoissonCloud":
        return PoissonCloud(self.t, -self.x, self.v, self.alpha, self.a, self.L, self.d, -self.center, self.seed)

    def exit_radius(self) -> float:
        """Distance from the origin to the nearest face of the spatial window."""
        return self.L - abs(self.center)


def sample_cloud(alpha: float, a: float, L: float, d: int, rng_key: StreamKey, center: float = 0.0) -> PoissonCloud:
    """
    Poisson cloud with intensity dt ⊗ dx ⊗ αυ^{-(1+α)}dυ on [0,1] × [c-L, c+L]^d × [a, ∞).

    The point count is Poisson with mean (2L)^d a^{-α}; weights satisfy P(υ > v) = (a/v)^α.
    """
    if a <= 0:
        raise DomainError("weight floor a must be positive (a = 0 has infinite intensity)", a=a)
    if L <= 0:
        raise DomainError("window half-width L must be positive", L=L)
    gen = generator(rng_key.child(Stream.CLOUD))
    mean = (2.0 * L) ** d * a ** (-alpha)
    count = int(gen.poisson(mean))
    t = gen.random(count)
    x = gen.uniform(center - L, center + L, size=(count, d))
    v = a * (1.0 - gen.random(count)) ** (-1.0 / alpha)
    return PoissonCloud(t, x, v, alpha, a, L, d, center, rng_key.seed)


def save_cloud(cloud: PoissonCloud, path: Union[str, Path]) -> Path:
    """CSV: a header row (alpha, a, L, d, seed, center), then rows t, x1..xd, υ."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "a", "L", "d", "seed", "center"])
        writer.writerow([repr(cloud.alpha), repr(cloud.a), repr(cloud.L), cloud.d, cloud.seed, repr(cloud.center)])
        writer.writerow(["t"] + [f"x{k + 1}" for k in range(cloud.d)] + ["v"])
        for t, x, v in zip(cloud.t, cloud.x, cloud.v):
            writer.writerow([repr(float(t))] + [repr(float(c)) for c in x] + [repr(float(v))])
    return path


def load_cloud(path: Union[str, Path]) -> PoissonCloud:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][:4] != ["alpha", "a", "L", "d"]:
        raise PolymerLabError(ErrorCode.IO_ERROR, "not a cloud CSV", {"path": str(path)})
    alpha, a, L, d, seed, center = rows[1]
    d = int(d)
    data = np.array([[float(c) for c in row] for row in rows[3:]]).reshape(-1, d + 2)
    return PoissonCloud(
        data[:, 0], data[:, 1:1 + d], data[:, 1 + d], float(alpha), float(a), float(L), d,
        float(center), int(seed) if seed not in ("", "None") else None,
    )
