"""Synthetic-data quality metrics.

All comparisons treat the first table as the reference ("real") side:
quantile bin edges for the pairwise-TVD metric come from the real table
only, and Gower ranges are pooled over both tables. Metrics are pure and
row-order invariant.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats as scipy_stats

from .binning import bin_values, quantile_edges
from .errors import DataError, SchemaError
from .table import Table

_GOWER_CHUNK = 256


def _require_same_schema(real: Table, synth: Table) -> None:
    if real.schema != synth.schema:
        raise SchemaError("real and synthetic tables must share a schema")


# -- mixed association matrix -------------------------------------------------


@dataclass(frozen=True)
class MixedCorrelationMatrix:
    """Symmetric association grid with a per-pair method tag.

    Pairs involving a constant column get association 0 and are listed in
    ``constant_pairs``.
    """

    values: np.ndarray
    methods: tuple[tuple[str, ...], ...]
    constant_pairs: frozenset[tuple[int, int]]


def spearman(x: np.ndarray, y: np.ndarray) -> float | None:
    """Rank correlation with average ranks; None for constant input."""
    rx = scipy_stats.rankdata(x)
    ry = scipy_stats.rankdata(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((rx - rx.mean()) @ (ry - ry.mean())) / (len(rx) * sx * sy))


def cramers_v(x_idx: np.ndarray, y_idx: np.ndarray, kx: int, ky: int) -> float | None:
    """Bias-uncorrected Cramér's V; None when either side is constant."""
    counts = np.zeros((kx, ky))
    np.add.at(counts, (x_idx, y_idx), 1.0)
    counts = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    r, c = counts.shape
    if r < 2 or c < 2:
        return None
    n = counts.sum()
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    return float(np.sqrt(chi2 / (n * (min(r, c) - 1))))


def correlation_ratio(groups: np.ndarray, y: np.ndarray) -> float | None:
    """Correlation ratio eta: sqrt(between-group SS / total SS)."""
    total = float(((y - y.mean()) ** 2).sum())
    if total == 0.0:
        return None
    between = 0.0
    for g in np.unique(groups):
        member = y[groups == g]
        between += len(member) * (member.mean() - y.mean()) ** 2
    ratio = min(max(between / total, 0.0), 1.0)
    return float(np.sqrt(ratio))


def mixed_correlation(t: Table) -> MixedCorrelationMatrix:
    """Pairwise association: Spearman (numeric-numeric), Cramér's V
    (categorical-categorical), correlation ratio (mixed pairs)."""
    if t.n < 2:
        raise DataError("need at least two rows")
    d = t.d
    values = np.eye(d)
    methods = [["" for _ in range(d)] for _ in range(d)]
    constants: set[tuple[int, int]] = set()
    for i in range(d):
        methods[i][i] = _pair_method(t, i, i)
    for i, j in combinations(range(d), 2):
        method = _pair_method(t, i, j)
        si, sj = t.schema[i], t.schema[j]
        ci, cj = t.columns()[i], t.columns()[j]
        if method == "spearman":
            assoc = spearman(ci, cj)
        elif method == "cramers_v":
            assoc = cramers_v(ci, cj, len(si.categories), len(sj.categories))
        else:
            groups, y = (ci, cj) if not si.is_numeric else (cj, ci)
            assoc = correlation_ratio(groups, y)
        if assoc is None:
            assoc = 0.0
            constants.add((i, j))
        values[i, j] = values[j, i] = assoc
        methods[i][j] = methods[j][i] = method
    return MixedCorrelationMatrix(
        values, tuple(tuple(row) for row in methods), frozenset(constants)
    )


def _pair_method(t: Table, i: int, j: int) -> str:
    ni, nj = t.schema[i].is_numeric, t.schema[j].is_numeric
    if ni and nj:
        return "spearman"
    if not ni and not nj:
        return "cramers_v"
    return "eta"


def cmd(real: Table, synth: Table) -> float:
    """Frobenius norm of the difference of the two association matrices."""
    _require_same_schema(real, synth)
    diff = mixed_correlation(real).values - mixed_correlation(synth).values
    return float(np.linalg.norm(diff))


# -- pairwise total variation -------------------------------------------------


def kmtvd(real: Table, synth: Table, k: int = 2, bins: int = 20) -> float:
    """Mean TVD of the joint histogram over every k-subset of variables,
    after discretizing numeric columns by the real table's quantiles."""
    _require_same_schema(real, synth)
    if not 1 <= k <= real.d:
        raise DataError(f"subset size {k} out of range for {real.d} columns")
    if real.d < 2 and k == 2:
        raise DataError("pairwise TVD needs at least two columns")
    real_disc, widths = _discretize(real, real, bins)
    synth_disc, _ = _discretize(synth, real, bins)
    tvds = []
    for subset in combinations(range(real.d), k):
        dims = [widths[j] for j in subset]
        p_cells = np.ravel_multi_index([real_disc[j] for j in subset], dims)
        q_cells = np.ravel_multi_index([synth_disc[j] for j in subset], dims)
        size = int(np.prod(dims))
        if size <= 1_000_000:
            p = np.bincount(p_cells, minlength=size) / real.n
            q = np.bincount(q_cells, minlength=size) / synth.n
            tvds.append(0.5 * np.abs(p - q).sum())
        else:  # sparse joint space: count observed cells only
            cells, inverse = np.unique(
                np.concatenate([p_cells, q_cells]), return_inverse=True
            )
            p = np.bincount(inverse[: real.n], minlength=len(cells)) / real.n
            q = np.bincount(inverse[real.n :], minlength=len(cells)) / synth.n
            tvds.append(0.5 * np.abs(p - q).sum())
    return float(np.mean(tvds))


def _discretize(t: Table, reference: Table, bins: int):
    """Bin t's numeric columns by reference quantile edges; categorical
    columns pass through as indices. Returns (columns, bin counts)."""
    cols, widths = [], []
    for c, ref_schema in zip(t.schema, reference.schema):
        values = t.column(c.name)
        if c.is_numeric:
            edges = quantile_edges(reference.column(c.name), bins)
            cols.append(bin_values(values, edges))
            widths.append(len(edges) + 1)
        else:
            cols.append(values)
            widths.append(len(c.categories))
    return cols, widths


def pair_tvd(ra, rb, sa, sb, wa: int, wb: int) -> float:
    """0.5 * sum |P - Q| over the joint cells of one variable pair."""
    p = np.bincount(ra * wb + rb, minlength=wa * wb) / len(ra)
    q = np.bincount(sa * wb + sb, minlength=wa * wb) / len(sa)
    return float(0.5 * np.abs(p - q).sum())


# -- Gower distance and adversarial accuracy ----------------------------------


def gower_ranges(pool: list[Table]) -> np.ndarray:
    """Per-column value ranges over the pooled tables (0 for categorical)."""
    first = pool[0]
    ranges = np.zeros(first.d)
    for j, c in enumerate(first.schema):
        if c.is_numeric:
            lo = min(t.columns()[j].min() for t in pool)
            hi = max(t.columns()[j].max() for t in pool)
            ranges[j] = hi - lo
    return ranges


def gower(u, v, schema, ranges) -> float:
    """Mean per-column distance between two rows: range-normalized absolute
    difference for numeric columns (0 if the range is 0), mismatch
    indicator for categorical ones."""
    total = 0.0
    for j, c in enumerate(schema):
        if c.is_numeric:
            if ranges[j] > 0:
                total += abs(float(u[j]) - float(v[j])) / ranges[j]
        else:
            total += float(u[j] != v[j])
    return total / len(schema)


def _gower_matrix(a: Table, b: Table, ranges: np.ndarray) -> np.ndarray:
    """Dense pairwise Gower distances, chunked over rows of ``a``."""
    out = np.zeros((a.n, b.n))
    d = a.d
    for start in range(0, a.n, _GOWER_CHUNK):
        stop = min(start + _GOWER_CHUNK, a.n)
        acc = np.zeros((stop - start, b.n))
        for j, c in enumerate(a.schema):
            col_a = a.columns()[j][start:stop, None]
            col_b = b.columns()[j][None, :]
            if c.is_numeric:
                if ranges[j] > 0:
                    acc += np.abs(col_a - col_b) / ranges[j]
            else:
                acc += col_a != col_b
        out[start:stop] = acc / d
    return out


def nnaa(real: Table, synth: Table) -> float:
    """Nearest-neighbor adversarial accuracy with Gower distances.

    Within-set nearest neighbors exclude the point itself; distance ties
    count as indistinguishable (strict comparison). 0.5 means real and
    synthetic are hard to tell apart, 0 flags copying, 1 disjoint supports.
    """
    _require_same_schema(real, synth)
    if real.n != synth.n:
        raise DataError("adversarial accuracy requires equal-size tables")
    if real.n < 2:
        raise DataError("need at least two rows per table")
    ranges = gower_ranges([real, synth])
    cross = _gower_matrix(real, synth, ranges)
    within_real = _gower_matrix(real, real, ranges)
    within_synth = _gower_matrix(synth, synth, ranges)
    np.fill_diagonal(within_real, np.inf)
    np.fill_diagonal(within_synth, np.inf)
    d_ts = cross.min(axis=1)
    d_st = cross.min(axis=0)
    d_tt = within_real.min(axis=1)
    d_ss = within_synth.min(axis=1)
    return float(0.5 * ((d_ts > d_tt).mean() + (d_st > d_ss).mean()))


# -- spurious correlations and treatment effects -------------------------------


def spurious_report(
    synth: Table, pairs: list[tuple[str, str]]
) -> list[tuple[tuple[str, str], float | None]]:
    """Plain Pearson correlation per requested numeric pair; None marks a
    constant column."""
    out = []
    for a, b in pairs:
        xa, xb = synth.column(a), synth.column(b)
        if not (synth.column_schema(a).is_numeric and synth.column_schema(b).is_numeric):
            raise SchemaError(f"spurious pair ({a!r}, {b!r}) must be numeric")
        sa, sb = xa.std(), xb.std()
        if sa == 0.0 or sb == 0.0:
            out.append(((a, b), None))
        else:
            r = float(((xa - xa.mean()) @ (xb - xb.mean())) / (len(xa) * sa * sb))
            out.append(((a, b), r))
    return out


def ate_from_table(
    t: Table,
    treatment: str,
    outcome: str,
    x0: float,
    x1: float,
    assign: str = "exact",
) -> float:
    """Difference of outcome means between the two treatment arms.

    ``assign="nearest"`` maps each row to the closer intervention value,
    for synthetic data with a continuous treatment column.
    """
    tv = t.column(treatment)
    y = t.column(outcome)
    if not t.column_schema(outcome).is_numeric:
        raise SchemaError("outcome must be numeric")
    if assign == "exact":
        arm0, arm1 = tv == x0, tv == x1
    elif assign == "nearest":
        arm1 = np.abs(tv - x1) < np.abs(tv - x0)
        arm0 = ~arm1
    else:
        raise DataError(f"unknown arm assignment {assign!r}")
    if not arm0.any() or not arm1.any():
        raise DataError("one treatment arm is empty")
    return float(y[arm1].mean() - y[arm0].mean())


def delta_ate(a: float, b: float) -> float:
    return abs(a - b)


# -- combined report -------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    cmd: float | None
    kmtvd: float | None
    nnaa: float | None
    spurious: list[tuple[tuple[str, str], float | None]]

    def as_dict(self) -> dict:
        return {
            "cmd": self.cmd,
            "kmtvd": self.kmtvd,
            "nnaa": self.nnaa,
            "spurious": [
                {"pair": list(pair), "pearson": value} for pair, value in self.spurious
            ],
        }


ALL_METRICS = ("cmd", "kmtvd", "nnaa")


def evaluate_tables(
    real: Table,
    synth: Table,
    spurious_pairs: list[tuple[str, str]] | None = None,
    metrics=ALL_METRICS,
) -> MetricReport:
    _require_same_schema(real, synth)
    return MetricReport(
        cmd=cmd(real, synth) if "cmd" in metrics else None,
        kmtvd=kmtvd(real, synth) if "kmtvd" in metrics else None,
        nnaa=nnaa(real, synth) if "nnaa" in metrics else None,
        spurious=spurious_report(synth, spurious_pairs or []),
    )
