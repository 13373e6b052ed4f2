"""Wilcoxon signed-rank test with an exact small-sample tail.

Conventions: zero differences are dropped, tied absolute differences get
average ranks, W is the sum of ranks of positive differences. For n <= 25
the p-value is exact over all 2^n equiprobable sign assignments (computed
by integer convolution over the rank-sum distribution, which enumerates
the same set); beyond that a tie-corrected normal approximation is used.
The two-sided p is min(1, 2 * min(greater, less)).
"""

from __future__ import annotations

import math

import numpy as np

EXACT_LIMIT = 25
ALTERNATIVES = ("two_sided", "greater", "less")


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1, ties sharing the mean of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_tail_counts(doubled_ranks: list[int]) -> list[int]:
    """counts[s] = number of sign assignments with positive-rank-sum s/2.

    Polynomial product of (1 + x^r) over the doubled integer ranks; the
    coefficient table is the full 2^n enumeration in aggregate.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    return counts


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(x, y, alternative: str = "two_sided") -> tuple[float, float]:
    """Paired signed-rank test of x against y.

    Returns (W, p) where W is the positive-rank sum of d = x - y and the
    alternative 'greater' means x tends to exceed y. All-zero differences
    give (0, 1).
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 1:
        raise ValueError(f"need equal-length 1-D samples, got {x.shape} and {y.shape}")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    ranks = _average_ranks(np.abs(d))
    w = float(ranks[d > 0].sum())

    if n <= EXACT_LIMIT:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _exact_tail_counts(doubled)
        w2 = int(round(2 * w))
        denom = 1 << n
        p_greater = sum(counts[w2:]) / denom
        p_less = sum(counts[: w2 + 1]) / denom
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        sd = math.sqrt(var)
        p_greater = _normal_sf((w - mean) / sd)
        p_less = _normal_sf((mean - w) / sd)

    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    else:
        p = min(1.0, 2.0 * min(p_greater, p_less))
    return w, p
