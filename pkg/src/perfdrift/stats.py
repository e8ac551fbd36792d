"""Mann-Whitney U test, self-contained.

Exact p-values come from the full rank-sum distribution (counting recurrence)
for small tie-free samples; everything else uses the normal approximation with
tie-corrected variance and a continuity correction. No SciPy at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

EXACT_LIMIT = 16  # combined sample size up to which the exact distribution is used


class PValueMethod(Enum):
    EXACT = "exact"
    NORMAL_APPROX = "normal_approx"


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float  # U of the first sample
    p_value: float
    method: PValueMethod
    tie_correction: float  # sum of (t^3 - t) over tie groups; 0 when tie-free


def rank_with_ties(values) -> np.ndarray:
    """Fractional ranks 1..n; tied values share the mean of their rank span."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot rank an empty sequence")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # mean of ranks i+1..j+1
        i = j + 1
    return ranks


def _tie_term(pooled_sorted: np.ndarray) -> float:
    """Sum of t^3 - t over groups of tied values."""
    total = 0.0
    i = 0
    n = pooled_sorted.size
    while i < n:
        j = i
        while j + 1 < n and pooled_sorted[j + 1] == pooled_sorted[i]:
            j += 1
        t = j - i + 1
        if t > 1:
            total += t**3 - t
        i = j + 1
    return total


@lru_cache(maxsize=None)
def _u_counts(n: int, total: int) -> np.ndarray:
    """Null distribution of U for an n-subset of ranks {1..total}.

    Entry u counts the subsets whose rank sum equals u + n(n+1)/2, so the
    index runs over the U statistic itself. Subset-sum counting; sizes are
    tiny (total <= EXACT_LIMIT).
    """
    max_sum = total * (total + 1) // 2
    f = np.zeros((n + 1, max_sum + 1), dtype=np.int64)
    f[0, 0] = 1
    for rank in range(1, total + 1):
        for k in range(min(n, rank), 0, -1):
            f[k, rank:] += f[k - 1, : max_sum + 1 - rank]
    lo = n * (n + 1) // 2
    return f[n, lo : lo + n * (total - n) + 1].copy()


def _exact_p(u1: float, n: int, m: int, alternative: str) -> float:
    counts = _u_counts(n, n + m)
    total = math.comb(n + m, n)
    u = int(round(u1))  # tie-free, so U is integral
    cdf_le = int(counts[: u + 1].sum()) / total
    cdf_ge = int(counts[u:].sum()) / total
    if alternative == "two-sided":
        return min(1.0, 2.0 * min(cdf_le, cdf_ge))
    if alternative == "greater":
        return cdf_ge
    return cdf_le


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _approx_p(u1: float, n: int, m: int, tie_term: float, alternative: str) -> float:
    mu = 0.5 * n * m
    big_n = n + m
    var = (n * m / 12.0) * (big_n + 1.0 - tie_term / (big_n * (big_n - 1.0)))
    if var <= 0.0:  # every pooled value identical
        return 1.0
    sd = math.sqrt(var)
    if alternative == "two-sided":
        z = (abs(u1 - mu) - 0.5) / sd
        return min(1.0, 2.0 * _normal_sf(max(z, 0.0)))
    if alternative == "greater":
        return _normal_sf((u1 - mu - 0.5) / sd)
    return _normal_sf((mu - u1 - 0.5) / sd)


def mann_whitney_u(a, b, alternative: str = "two-sided") -> UTestResult:
    """Two-sample Mann-Whitney U test.

    ``alternative`` is one of ``two-sided`` (default), ``greater`` (first
    sample tends larger) or ``less``. U is reported for the first sample.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = rank_with_ties(pooled)
    u1 = float(ranks[:n].sum()) - 0.5 * n * (n + 1)
    tie_term = _tie_term(np.sort(pooled))

    if n + m <= EXACT_LIMIT and tie_term == 0.0:
        p = _exact_p(u1, n, m, alternative)
        method = PValueMethod.EXACT
    else:
        p = _approx_p(u1, n, m, tie_term, alternative)
        method = PValueMethod.NORMAL_APPROX
    return UTestResult(u_statistic=u1, p_value=float(p), method=method, tie_correction=tie_term)
