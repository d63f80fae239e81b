"""Causal structure discovery: CI tests, order-independent PC-stable,
Meek orientation closure, and recovery-quality metrics.

The skeleton phase freezes every node's adjacency set at the start of each
conditioning-set-size level, so edge removals within a level cannot
influence which conditioning sets are enumerated. Combined with
name-sorted iteration everywhere, the output is exactly invariant under
column permutations of the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats as scipy_stats

from .binning import bin_values, quantile_edges
from .errors import CiTestError, DataError, GraphError
from .graphs import CausalDag, Cpdag, _kahn
from .table import CATEGORICAL, NUMERIC, ColumnSchema, Table


@dataclass(frozen=True)
class CiTestResult:
    statistic: float
    p_value: float
    independent: bool
    sparse: bool = False  # a contingency stratum had expected counts < 5


# -- Fisher-Z ---------------------------------------------------------------


def fisher_z(data: Table, x: str, y: str, z=(), alpha: float = 0.05) -> CiTestResult:
    """Partial-correlation test for Gaussian variables.

    Residualizes x and y on z by least squares, applies the Fisher
    transform to the residual correlation, and compares
    sqrt(n - |z| - 3) * atanh(r) against a standard normal.
    """
    z = sorted(z)
    for name in (x, y, *z):
        if data.column_schema(name).kind != NUMERIC:
            raise CiTestError(f"fisher_z requires numeric columns, {name!r} is not")
    n = data.n
    if n <= len(z) + 3:
        raise CiTestError(f"need more than |z|+3 = {len(z) + 3} rows, have {n}")
    xv, yv = data.column(x), data.column(y)
    if z:
        design = np.column_stack([np.ones(n)] + [data.column(c) for c in z])
        coef, _, _, _ = np.linalg.lstsq(design, np.column_stack([xv, yv]), rcond=None)
        resid = np.column_stack([xv, yv]) - design @ coef
        rx, ry = resid[:, 0], resid[:, 1]
    else:
        rx, ry = xv - xv.mean(), yv - yv.mean()
    sx = float(np.sqrt(rx @ rx))
    sy = float(np.sqrt(ry @ ry))
    if sx == 0.0 or sy == 0.0:
        raise CiTestError(f"constant column among ({x!r}, {y!r}) given {z!r}")
    r = float((rx @ ry) / (sx * sy))
    r = min(max(r, -1.0 + 1e-15), 1.0 - 1e-15)
    statistic = np.sqrt(n - len(z) - 3) * np.arctanh(r)
    p = 2.0 * scipy_stats.norm.sf(abs(statistic))
    return CiTestResult(float(statistic), float(p), bool(p > alpha))


# -- G² ---------------------------------------------------------------------


def g2_test(data: Table, x: str, y: str, z=(), alpha: float = 0.05) -> CiTestResult:
    """Log-likelihood-ratio independence test on contingency tables,
    stratified by the configuration of the conditioning variables.

    Cells whose expected count is zero (an empty marginal row or column)
    contribute nothing and shrink the degrees of freedom.
    """
    z = sorted(z)
    for name in (x, y, *z):
        if data.column_schema(name).kind != CATEGORICAL:
            raise CiTestError(f"g2_test requires categorical columns, {name!r} is not")
    xv, yv = data.column(x), data.column(y)
    kx = len(data.column_schema(x).categories)
    ky = len(data.column_schema(y).categories)
    if z:
        dims = [len(data.column_schema(c).categories) for c in z]
        strata = np.ravel_multi_index(tuple(data.column(c) for c in z), dims)
    else:
        strata = np.zeros(data.n, dtype=np.int64)

    g2 = 0.0
    df = 0
    sparse = False
    for s in np.unique(strata):
        mask = strata == s
        counts = np.zeros((kx, ky))
        np.add.at(counts, (xv[mask], yv[mask]), 1.0)
        total = counts.sum()
        row = counts.sum(axis=1)
        col = counts.sum(axis=0)
        live_rows = int((row > 0).sum())
        live_cols = int((col > 0).sum())
        if live_rows < 2 or live_cols < 2:
            continue
        expected = np.outer(row, col) / total
        observed = counts > 0
        g2 += 2.0 * float(
            (counts[observed] * np.log(counts[observed] / expected[observed])).sum()
        )
        if (expected[np.ix_(row > 0, col > 0)] < 5).any():
            sparse = True
        df += (live_rows - 1) * (live_cols - 1)
    if df == 0:
        raise CiTestError(f"no informative strata for ({x!r}, {y!r}) given {z!r}")
    p = float(scipy_stats.chi2.sf(g2, df))
    return CiTestResult(float(g2), p, bool(p > alpha), sparse)


# -- test dispatch -----------------------------------------------------------


class CiDispatch:
    """Default test router: Fisher-Z when x, y and every conditioning
    variable are numeric; otherwise numeric variables are discretized into
    quantile bins and G² is applied."""

    def __init__(self, data: Table, alpha: float = 0.05, bins: int = 5):
        self.data = data
        self.alpha = alpha
        self.bins = bins
        self._binned: Table | None = None

    def _binned_table(self) -> Table:
        if self._binned is None:
            schema, cols = [], []
            for c in self.data.schema:
                values = self.data.column(c.name)
                if c.is_numeric:
                    edges = quantile_edges(values, self.bins)
                    idx = bin_values(values, edges)
                    labels = tuple(f"b{i}" for i in range(len(edges) + 1))
                    schema.append(ColumnSchema(c.name, CATEGORICAL, labels))
                    cols.append(idx)
                else:
                    schema.append(c)
                    cols.append(values)
            self._binned = Table(schema, cols)
        return self._binned

    def __call__(self, x: str, y: str, z=()) -> CiTestResult:
        involved = (x, y, *z)
        if all(self.data.column_schema(c).kind == NUMERIC for c in involved):
            return fisher_z(self.data, x, y, z, self.alpha)
        return g2_test(self._binned_table(), x, y, z, self.alpha)


# -- PC-stable ---------------------------------------------------------------


def pc_stable(
    data: Table,
    alpha: float = 0.05,
    test=None,
    max_cond: int = 3,
) -> Cpdag:
    """Order-independent PC: stable skeleton, v-structure orientation from
    separating sets, then Meek closure.

    ``test`` is a callable ``(x, y, z) -> CiTestResult``; tests that cannot
    be evaluated (constant columns, empty strata) count as dependence.
    """
    if data.d < 2:
        raise DataError("need at least two columns for discovery")
    if test is None:
        test = CiDispatch(data, alpha)
    nodes = list(data.names)
    adjacency: dict[str, set[str]] = {
        v: {u for u in nodes if u != v} for v in nodes
    }
    sepsets: dict[frozenset, tuple[str, ...]] = {}

    level = 0
    while level <= max_cond:
        frozen = {v: sorted(adjacency[v]) for v in nodes}
        if all(len(frozen[v]) - 1 < level for v in nodes):
            break
        for x in sorted(nodes):
            for y in frozen[x]:
                if x >= y or y not in adjacency[x]:
                    continue
                removed = False
                for side in (x, y):
                    other = y if side == x else x
                    candidates = [v for v in frozen[side] if v != other]
                    if len(candidates) < level:
                        continue
                    for subset in combinations(candidates, level):
                        try:
                            result = test(x, y, subset)
                        except CiTestError:
                            continue
                        if result.independent:
                            adjacency[x].discard(y)
                            adjacency[y].discard(x)
                            sepsets[frozenset((x, y))] = subset
                            removed = True
                            break
                    if removed:
                        break
        level += 1

    skeleton = {
        frozenset((x, y)) for x in nodes for y in adjacency[x] if x < y
    }

    # v-structures: x - b - y with x, y non-adjacent and b outside sep(x, y)
    arrowheads: set[tuple[str, str]] = set()
    for b in sorted(nodes):
        neighbors = sorted(adjacency[b])
        for x, y in combinations(neighbors, 2):
            if frozenset((x, y)) in skeleton or frozenset((x, y)) not in sepsets:
                continue
            if b not in sepsets[frozenset((x, y))]:
                arrowheads.add((x, b))
                arrowheads.add((y, b))

    directed = set()
    undirected = set(skeleton)
    for u, v in sorted(arrowheads):
        if (v, u) in arrowheads:
            continue  # conflicting colliders: stay undirected
        directed.add((u, v))
        undirected.discard(frozenset((u, v)))

    return meek_closure(Cpdag(tuple(nodes), directed, undirected))


# -- Meek closure -------------------------------------------------------------


def meek_closure(g: Cpdag) -> Cpdag:
    """Fixpoint of the four orientation-propagation rules.

    Never removes an edge or flips an existing orientation; raises if an
    implied orientation would close a directed cycle (inconsistent input).
    """
    nodes = tuple(g.nodes)
    directed: set[tuple[str, str]] = set(g.directed)
    undirected: set[frozenset] = set(g.undirected)

    def adjacent(a, b):
        return (
            (a, b) in directed or (b, a) in directed or frozenset((a, b)) in undirected
        )

    def orient(a, b):
        undirected.discard(frozenset((a, b)))
        directed.add((a, b))
        try:
            _kahn(nodes, frozenset(directed))
        except GraphError:
            raise GraphError(
                f"meek closure would create a cycle orienting {a!r} -> {b!r}"
            ) from None

    def find_orientation():
        pairs = sorted(
            (a, b)
            for pair in undirected
            for a, b in (tuple(sorted(pair)), tuple(sorted(pair))[::-1])
        )
        for a, b in pairs:
            # R1: c -> a, a - b, c and b non-adjacent
            for c, a2 in sorted(directed):
                if a2 == a and c != b and not adjacent(c, b):
                    return a, b
            # R2: a -> c -> b with a - b
            for a2, c in sorted(directed):
                if a2 == a and (c, b) in directed:
                    return a, b
            # R3: a - c -> b and a - d -> b with c, d non-adjacent
            mids = sorted(
                c
                for (c, b2) in directed
                if b2 == b and frozenset((a, c)) in undirected
            )
            for c, d in combinations(mids, 2):
                if not adjacent(c, d):
                    return a, b
            # R4: a - c, c -> d, d -> b, a and d adjacent, c and b non-adjacent
            for c, d in sorted(directed):
                if (
                    frozenset((a, c)) in undirected
                    and (d, b) in directed
                    and adjacent(a, d)
                    and not adjacent(c, b)
                ):
                    return a, b
        return None

    while True:
        found = find_orientation()
        if found is None:
            break
        orient(*found)
    return Cpdag(nodes, directed, undirected)


# -- recovery quality ----------------------------------------------------------


@dataclass(frozen=True)
class GraphQuality:
    """Recovery scores against a reference DAG; None marks an undefined
    ratio (no oriented edges, or an empty reference)."""

    skeleton_recall: float | None
    direction_recall: float | None
    oriented_fraction: float | None
    direction_precision: float | None

    def as_dict(self) -> dict:
        return {
            "skeleton_recall": self.skeleton_recall,
            "direction_recall": self.direction_recall,
            "oriented_fraction": self.oriented_fraction,
            "direction_precision": self.direction_precision,
        }


def graph_quality(
    estimated: Cpdag, truth: CausalDag, mutilate_treatment: str | None = None
) -> GraphQuality:
    """Skeleton/direction recall of ``estimated`` against ``truth``.

    With ``mutilate_treatment``, edges into the treatment are first removed
    from the reference graph (the ground truth for interventional data).
    """
    if sorted(estimated.nodes) != sorted(truth.nodes):
        raise GraphError("estimated and true graphs have different node sets")
    true_edges = set(truth.edges)
    if mutilate_treatment is not None:
        if mutilate_treatment not in truth.nodes:
            raise GraphError(f"unknown treatment {mutilate_treatment!r}")
        true_edges = {e for e in true_edges if e[1] != mutilate_treatment}
    true_skeleton = {frozenset(e) for e in true_edges}
    est_directed = set(estimated.directed)
    est_skeleton = estimated.skeleton()

    skeleton_recall = (
        len(est_skeleton & true_skeleton) / len(true_skeleton) if true_skeleton else None
    )
    direction_recall = (
        len(est_directed & true_edges) / len(true_edges) if true_edges else None
    )
    n_est = len(est_directed) + len(estimated.undirected)
    oriented_fraction = len(est_directed) / n_est if n_est else None
    direction_precision = (
        len(est_directed & true_edges) / len(est_directed) if est_directed else None
    )
    return GraphQuality(
        skeleton_recall, direction_recall, oriented_fraction, direction_precision
    )
