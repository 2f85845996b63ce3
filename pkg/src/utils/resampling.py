"""Standard errors by jackknife and bootstrap."""

from typing import Callable

import numpy as np


def jackknife_mean_se(values: np.ndarray) -> float:
    """Jackknife standard error of the sample mean (leave-one-out means)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return float("nan")
    loo = (values.sum() - values) / (n - 1)
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def bootstrap_se(
    statistic: Callable[[np.ndarray, np.ndarray], float],
    sample_a: np.ndarray,
    sample_b: np.ndarray,
    rng: np.random.Generator,
    resamples: int,
) -> float:
    """Bootstrap standard deviation of a two-sample statistic."""
    sample_a = np.asarray(sample_a, dtype=float)
    sample_b = np.asarray(sample_b, dtype=float)
    stats = np.empty(resamples)
    for i in range(resamples):
        ra = sample_a[rng.integers(0, sample_a.size, sample_a.size)]
        rb = sample_b[rng.integers(0, sample_b.size, sample_b.size)]
        stats[i] = statistic(ra, rb)
    return float(stats.std(ddof=1)) if resamples > 1 else 0.0
