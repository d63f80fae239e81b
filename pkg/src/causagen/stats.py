"""Paired nonparametric comparison machinery.

Wilcoxon signed-rank with Pratt zero handling: absolute differences are
ranked with zeros included (average ranks for ties), then the zero ranks
are dropped from both signed sums. The p-value is exact (subset-sum
enumeration over the integer ranks) when at most 25 nonzero differences
carry no tied magnitudes, and a tie-corrected, continuity-corrected normal
approximation otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .errors import DataError
from .seeding import rng_for

EXACT_LIMIT = 25


def wilcoxon_pratt(diffs) -> float:
    """Two-sided signed-rank p-value; 1.0 for an all-zero sample."""
    d = np.asarray(diffs, dtype=np.float64)
    if d.ndim != 1 or len(d) == 0:
        raise DataError("need a non-empty 1-d array of differences")
    if np.all(d == 0):
        return 1.0
    ranks = scipy_stats.rankdata(np.abs(d))
    nonzero = d != 0
    m = int(nonzero.sum())
    n_zero = len(d) - m
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())

    abs_nz = np.abs(d[nonzero])
    if m <= EXACT_LIMIT and len(np.unique(abs_nz)) == m:
        # nonzero ranks are exactly the integers n_zero+1 .. n_zero+m
        return _exact_two_sided(int(round(w_plus)), n_zero, m)

    n = len(d)
    t_stat = min(w_plus, w_minus)
    mean = n * (n + 1) / 4.0 - n_zero * (n_zero + 1) / 4.0
    var24 = n * (n + 1) * (2 * n + 1) - n_zero * (n_zero + 1) * (2 * n_zero + 1)
    _, counts = np.unique(ranks[nonzero], return_counts=True)
    ties = counts[counts > 1].astype(np.float64)
    var24 -= 0.5 * float((ties**3 - ties).sum())
    se = np.sqrt(var24 / 24.0)
    if se == 0.0:
        return 1.0
    correction = 0.5 * np.sign(t_stat - mean)
    z = (t_stat - mean - correction) / se
    return float(min(1.0, 2.0 * scipy_stats.norm.sf(abs(z))))


def _signed_rank_counts(n_zero: int, m: int) -> np.ndarray:
    """Subset-sum counts of the rank set {n_zero+1, ..., n_zero+m}:
    counts[w] = number of sign assignments with positive-rank sum w."""
    ranks = range(n_zero + 1, n_zero + m + 1)
    total = sum(ranks)
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r]
        counts = counts + shifted
    return counts


def _exact_two_sided(w_plus: int, n_zero: int, m: int) -> float:
    counts = _signed_rank_counts(n_zero, m)
    total = counts.sum()
    p_le = counts[: w_plus + 1].sum() / total
    p_ge = counts[w_plus:].sum() / total
    return float(min(1.0, 2.0 * min(p_le, p_ge)))


# -- Holm step-down ------------------------------------------------------------


def holm(p_values) -> list[float]:
    """Step-down familywise adjustment; preserves input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if ((p < 0) | (p > 1)).any():
        raise DataError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for k, idx in enumerate(order):
        running = max(running, min(1.0, (m - k) * p[idx]))
        adjusted[idx] = running
    return adjusted.tolist()


# -- Hodges-Lehmann -------------------------------------------------------------


def walsh_averages(diffs) -> np.ndarray:
    d = np.asarray(diffs, dtype=np.float64)
    i, j = np.triu_indices(len(d))
    return (d[i] + d[j]) / 2.0


def hodges_lehmann(diffs) -> float:
    """Median of all pairwise averages (i <= j) of the differences."""
    d = np.asarray(diffs, dtype=np.float64)
    if len(d) == 0:
        raise DataError("need at least one difference")
    return float(np.median(walsh_averages(d)))


def hl_confidence_interval(
    diffs,
    alpha: float = 0.05,
    resamples: int = 10000,
    seed: int = 0,
) -> tuple[float, float]:
    """CI for the Hodges-Lehmann estimate.

    Inverts the exact signed-rank distribution when that distribution is
    exact for the sample (<= 25 differences, none zero, untied magnitudes);
    otherwise a percentile bootstrap over ``resamples`` redraws.
    """
    d = np.asarray(diffs, dtype=np.float64)
    n = len(d)
    if n == 0:
        raise DataError("need at least one difference")
    estimate = hodges_lehmann(d)
    if n <= EXACT_LIMIT and (d != 0).all() and len(np.unique(np.abs(d))) == n:
        walsh = np.sort(walsh_averages(d))
        counts = _signed_rank_counts(0, n)
        cdf = np.cumsum(counts) / counts.sum()
        # largest k with P(W+ <= k) <= alpha/2; k = -1 if none.
        # W+ acceptance region [k+1, M-k-1] inverts to the Walsh-average
        # interval [W_(k+1), W_(M-k)] (1-indexed).
        k = int(np.searchsorted(cdf, alpha / 2.0, side="right")) - 1
        lo = walsh[k] if k >= 0 else walsh[0]
        hi = walsh[len(walsh) - 1 - k] if k >= 0 else walsh[-1]
    else:
        rng = rng_for("hl-ci", seed)
        medians = np.empty(resamples)
        batch = max(1, min(resamples, 500))
        tri = np.triu_indices(n)
        done = 0
        while done < resamples:
            b = min(batch, resamples - done)
            idx = rng.integers(n, size=(b, n))
            sample = d[idx]
            walsh = (sample[:, tri[0]] + sample[:, tri[1]]) / 2.0
            medians[done : done + b] = np.median(walsh, axis=1)
            done += b
        lo = float(np.percentile(medians, 100 * alpha / 2.0))
        hi = float(np.percentile(medians, 100 * (1 - alpha / 2.0)))
    return min(lo, estimate), max(hi, estimate)


# -- order-sensitivity ranges -----------------------------------------------------


def sensitivity_range(values) -> float:
    """Spread of one metric across the three column orderings."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) != 3:
        raise DataError("expected exactly three ordering values")
    return float(v.max() - v.min())


def median_range_ci(
    ranges,
    resamples: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap CI for the median of per-iteration ranges."""
    r = np.asarray(ranges, dtype=np.float64)
    if len(r) == 0:
        raise DataError("need at least one range")
    rng = rng_for("range-ci", seed)
    idx = rng.integers(len(r), size=(resamples, len(r)))
    medians = np.median(r[idx], axis=1)
    return (
        float(np.percentile(medians, 100 * alpha / 2.0)),
        float(np.percentile(medians, 100 * (1 - alpha / 2.0))),
    )


# -- paired comparison record ------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    """One paired comparison cell: effect size, CI, raw and adjusted p."""

    hl_estimate: float
    ci_low: float
    ci_high: float
    p_raw: float
    p_adjusted: float
    significant: bool
    n_pairs: int

    def __post_init__(self):
        if not (self.ci_low <= self.hl_estimate <= self.ci_high):
            raise DataError("confidence interval must contain the estimate")
        if self.p_adjusted < self.p_raw - 1e-15:
            raise DataError("adjusted p-value cannot undercut the raw p-value")
