"""Two-sample distances between empirical laws."""

import logging
from typing import Literal, Optional

import numpy as np
from scipy.stats import ks_2samp, wasserstein_distance

from ..config import KS_BOOTSTRAP_RESAMPLES
from ..utils.errors import DomainError
from ..utils.resampling import bootstrap_se

logger = logging.getLogger(__name__)

Statistic = Literal["ks", "wasserstein1"]
STATISTICS = ("ks", "wasserstein1")


class DistanceReport:
    """One distance between two samples, with its bootstrap SD when requested."""

    def __init__(
        self,
        statistic: str,
        value: float,
        size_a: int,
        size_b: int,
        std_error: Optional[float] = None,
        p_value: Optional[float] = None,
        meta: Optional[dict] = None,
    ):
        self.statistic = statistic
        self.value = float(value)
        self.size_a = size_a
        self.size_b = size_b
        self.std_error = std_error
        self.p_value = p_value
        self.meta = dict(meta or {})

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "value": self.value,
            "size_a": self.size_a,
            "size_b": self.size_b,
            "std_error": self.std_error,
            "p_value": self.p_value,
            **self.meta,
        }

    def __repr__(self) -> str:
        return f"DistanceReport({self.statistic}={self.value:.6g}, n=({self.size_a}, {self.size_b}))"


def ks_statistic(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """sup_x |F_a(x) - F_b(x)| with right-continuous empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def wasserstein1(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    return float(wasserstein_distance(np.asarray(sample_a, dtype=float), np.asarray(sample_b, dtype=float)))


_STATISTIC_FNS = {"ks": ks_statistic, "wasserstein1": wasserstein1}


def empirical_distance(
    sample_a,
    sample_b,
    statistic: Statistic = "ks",
    rng: Optional[np.random.Generator] = None,
    resamples: int = KS_BOOTSTRAP_RESAMPLES,
) -> DistanceReport:
    """
    Distance between two empirical laws.

    Args:
        sample_a: First sample (non-empty)
        sample_b: Second sample (non-empty)
        statistic: "ks" or "wasserstein1"
        rng: When given, the bootstrap SD of the statistic is attached
        resamples: Bootstrap resamples

    Returns:
        DistanceReport
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise DomainError("samples must be non-empty", size_a=int(a.size), size_b=int(b.size))
    if statistic not in _STATISTIC_FNS:
        raise DomainError("unknown statistic", statistic=statistic, allowed=list(STATISTICS))
    fn = _STATISTIC_FNS[statistic]
    value = fn(a, b)
    se = bootstrap_se(fn, a, b, rng, resamples) if rng is not None else None
    p_value = None
    if statistic == "ks" and value > 0:
        p_value = float(ks_2samp(a, b, method="asymp").pvalue)
    elif statistic == "ks":
        p_value = 1.0
    return DistanceReport(statistic, value, int(a.size), int(b.size), se, p_value)
