"""Rank correlations and nonparametric tests used for result validation.

Test statistics are computed here from scratch; only the classical CDFs
(regularized incomplete gamma / Student t) come from scipy.special.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .metrics import rankdata


@dataclass
class StatResult:
    name: str
    statistic: float
    p_value: float
    group_sizes: list
    pairwise_p: np.ndarray | None = None
    flags: list = field(default_factory=list)


@dataclass
class RegressionSummary:
    slope: float
    intercept: float
    pearson_r: float
    spearman_rho: float
    n: int
    flags: list = field(default_factory=list)


def pearson(x, y):
    """Pearson correlation; 0.0 if either input is constant.

    The accumulation is symmetric term by term, so pearson(x, y) and
    pearson(y, x) are bitwise equal.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("length mismatch")
    if x.size < 2:
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float((dx * dx).sum())
    syy = float((dy * dy).sum())
    if sxx <= 0.0 or syy <= 0.0:
        return 0.0
    return float((dx * dy).sum() / np.sqrt(sxx * syy))


def spearman(x, y):
    """Spearman correlation via midranks; any constant input gives 0.0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("length mismatch")
    if x.size < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0
    return pearson(rankdata(x), rankdata(y))


def _tie_term(pooled):
    _, counts = np.unique(pooled, return_counts=True)
    t = counts.astype(np.float64)
    return float((t**3 - t).sum())


def kruskal_wallis(groups):
    """Kruskal-Wallis H with tie correction; p from the chi-square tail."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    sizes = [g.size for g in groups]
    if min(sizes) < 1:
        raise ValueError("empty group")
    n_total = sum(sizes)
    if n_total < 5:
        raise ValueError(f"need at least 5 values in total, got {n_total}")
    pooled = np.concatenate(groups)
    if np.all(pooled == pooled[0]):
        return StatResult("kruskal_wallis", 0.0, 1.0, sizes, flags=["all_identical"])
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for size in sizes:
        rbar = ranks[start : start + size].mean()
        h += size * (rbar - (n_total + 1) / 2.0) ** 2
        start += size
    h *= 12.0 / (n_total * (n_total + 1))
    correction = 1.0 - _tie_term(pooled) / (n_total**3 - n_total)
    flags = []
    if correction <= 0.0:
        return StatResult("kruskal_wallis", 0.0, 1.0, sizes, flags=["all_identical"])
    h /= correction
    dof = len(groups) - 1
    p = float(special.gammaincc(dof / 2.0, h / 2.0))
    return StatResult("kruskal_wallis", float(h), p, sizes, flags=flags)


def dunn_posthoc(groups):
    """Dunn pairwise z-tests on rank means, Bonferroni-corrected."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(groups)
    if k < 3:
        raise ValueError("need at least 3 groups")
    sizes = [g.size for g in groups]
    if min(sizes) < 1:
        raise ValueError("empty group")
    n_total = sum(sizes)
    pooled = np.concatenate(groups)
    ranks = rankdata(pooled)
    rank_means = []
    start = 0
    for size in sizes:
        rank_means.append(ranks[start : start + size].mean())
        start += size
    variance = n_total * (n_total + 1) / 12.0 - _tie_term(pooled) / (12.0 * (n_total - 1))
    m = k * (k - 1) // 2
    pmat = np.ones((k, k))
    zmax = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            se2 = variance * (1.0 / sizes[i] + 1.0 / sizes[j])
            if se2 <= 0.0:
                p = 1.0
            else:
                z = (rank_means[i] - rank_means[j]) / np.sqrt(se2)
                zmax = max(zmax, abs(z))
                p = min(1.0, float(special.erfc(abs(z) / np.sqrt(2.0))) * m)
            pmat[i, j] = pmat[j, i] = p
    return StatResult("dunn_bonferroni", float(zmax), float(pmat.min()), sizes, pairwise_p=pmat)


def paired_t_test(x, y):
    """Two-sided paired t-test; zero-variance differences flagged degenerate."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("length mismatch")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = x - y
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    sizes = [n]
    if sd == 0.0:
        if mean == 0.0:
            return StatResult("paired_t", 0.0, 1.0, sizes, flags=["degenerate"])
        t = np.inf if mean > 0 else -np.inf
        return StatResult("paired_t", float(t), 0.0, sizes, flags=["degenerate"])
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * float(special.stdtr(n - 1, -abs(t)))
    return StatResult("paired_t", float(t), p, sizes)


def regression(x, y):
    """Ordinary least squares with Pearson and Spearman correlations."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("length mismatch")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 points")
    dx = x - x.mean()
    sxx = float((dx * dx).sum())
    if sxx <= 0.0:
        return RegressionSummary(
            float("nan"), float(y.mean()), float("nan"), 0.0, n, flags=["zero_x_variance"]
        )
    slope = float((dx * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - slope * x.mean())
    return RegressionSummary(slope, intercept, pearson(x, y), spearman(x, y), n)
