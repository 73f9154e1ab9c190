"""Statistics for the evaluation protocol: Agresti-Coull binomial intervals,
paired t and Wilcoxon signed-rank tests, Bonferroni correction, and the
percentile bootstrap.

The Wilcoxon test is implemented here rather than delegated: the contract
requires midranks for ties plus an exact two-sided p by full sign enumeration
for effective n <= 20, with a tie-corrected, continuity-corrected normal
approximation above that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import stats as scipy_stats

EXACT_WILCOXON_MAX_N = 20


class IntervalMethod(Enum):
    AGRESTI_COULL = "agresti_coull"
    BOOTSTRAP_PERCENTILE = "bootstrap_percentile"


@dataclass(frozen=True)
class StatInterval:
    point: float
    lo: float
    hi: float
    method: IntervalMethod
    z_or_level: float
    n: int

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"interval bounds out of order: [{self.lo}, {self.hi}]")


def agresti_coull_interval(x: int, n: int, z: float = 1.96) -> StatInterval:
    """Adjusted-proportion binomial interval, clamped to [0, 1].

    n_adj = n + z^2, p_adj = (x + z^2/2) / n_adj,
    half-width = z * sqrt(p_adj * (1 - p_adj) / n_adj).
    The point estimate stays the raw proportion x/n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= x <= n:
        raise ValueError(f"x must be within [0, n], got x={x}, n={n}")
    n_adj = n + z * z
    p_adj = (x + z * z / 2.0) / n_adj
    half = z * math.sqrt(p_adj * (1.0 - p_adj) / n_adj)
    return StatInterval(
        point=x / n,
        lo=max(0.0, p_adj - half),
        hi=min(1.0, p_adj + half),
        method=IntervalMethod.AGRESTI_COULL,
        z_or_level=z,
        n=n,
    )


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test on the differences a - b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    diffs = a - b
    sd = diffs.std(ddof=1)
    if sd == 0.0:
        raise ValueError("zero variance: all differences are identical")
    t = float(diffs.mean() / (sd / math.sqrt(n)))
    p = float(2.0 * scipy_stats.t.sf(abs(t), df=n - 1))
    return t, min(1.0, p)


def _signed_rank_exact_p(ranks: np.ndarray, v: float) -> float:
    """Two-sided p over all 2^n sign assignments of the given midranks.

    The null distribution of the positive-rank sum W is symmetric about
    mu = sum(ranks)/2; p = P(W <= min(v, 2mu - v)) + P(W >= max(v, 2mu - v)).
    """
    sums = np.zeros(1)
    for rank in ranks:
        sums = np.concatenate([sums, sums + rank])
    mu = float(ranks.sum()) / 2.0
    lo, hi = min(v, 2.0 * mu - v), max(v, 2.0 * mu - v)
    total = sums.size
    p = (np.count_nonzero(sums <= lo) + np.count_nonzero(sums >= hi)) / total
    return min(1.0, float(p))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Wilcoxon signed-rank test; returns (V, two-sided p).

    Zero differences are dropped; |differences| are midranked; V is the sum
    of ranks of positive differences. The p-value is exact (full sign
    enumeration) for effective n <= 20 and a tie-corrected normal
    approximation with continuity correction above.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        raise ValueError("all differences are zero; test undefined")
    ranks = scipy_stats.rankdata(np.abs(diffs))
    v = float(ranks[diffs > 0].sum())
    if n <= EXACT_WILCOXON_MAX_N:
        return v, _signed_rank_exact_p(ranks, v)
    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    tie_term = float(((tie_counts**3 - tie_counts)).sum()) / 48.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if sigma2 <= 0.0:
        raise ValueError("degenerate rank variance")
    z = max(0.0, abs(v - mu) - 0.5) / math.sqrt(sigma2)
    p = float(2.0 * scipy_stats.norm.sf(z))
    return v, min(1.0, p)


def bonferroni(p_values: Sequence[float], m: int) -> list[float]:
    """Adjusted p-values min(1, p * m); m must cover all comparisons made."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m < len(p_values):
        raise ValueError("m must be at least the number of comparisons")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value out of range: {p}")
    return [min(1.0, p * m) for p in p_values]


def bootstrap_ci(
    values: Sequence[float],
    n_boot: int = 10000,
    level: float = 0.95,
    rng_seed: int = 0,
) -> StatInterval:
    """Percentile bootstrap of the mean; deterministic for a fixed seed."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("bootstrap over empty input")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    rng = np.random.default_rng(rng_seed)
    indices = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[indices].mean(axis=1)
    alpha = 1.0 - level
    lo, hi = np.quantile(means, [alpha / 2.0, 1.0 - alpha / 2.0])
    return StatInterval(
        point=float(values.mean()),
        lo=float(lo),
        hi=float(hi),
        method=IntervalMethod.BOOTSTRAP_PERCENTILE,
        z_or_level=level,
        n=int(values.size),
    )
