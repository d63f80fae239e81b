"""Independent brute-force reference implementations.

These deliberately avoid the library's code paths: plain loops,
dictionary counting, and exhaustive enumeration. They define the expected
values the fast implementations are checked against.
"""

import math
from itertools import combinations

import numpy as np


# -- associations ----------------------------------------------------------------


def _ranks_average(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return None
    return sxy / math.sqrt(sxx * syy)


def brute_spearman(x, y):
    return _pearson(_ranks_average(list(x)), _ranks_average(list(y)))


def brute_cramers_v(x, y):
    counts = {}
    for a, b in zip(x, y):
        counts[(a, b)] = counts.get((a, b), 0) + 1
    rows = sorted({a for a, _ in counts})
    cols = sorted({b for _, b in counts})
    if len(rows) < 2 or len(cols) < 2:
        return None
    n = len(x)
    row_tot = {r: sum(counts.get((r, c), 0) for c in cols) for r in rows}
    col_tot = {c: sum(counts.get((r, c), 0) for r in rows) for c in cols}
    chi2 = 0.0
    for r in rows:
        for c in cols:
            expected = row_tot[r] * col_tot[c] / n
            chi2 += (counts.get((r, c), 0) - expected) ** 2 / expected
    return math.sqrt(chi2 / (n * (min(len(rows), len(cols)) - 1)))


def brute_eta(groups, y):
    mean = sum(y) / len(y)
    total = sum((v - mean) ** 2 for v in y)
    if total == 0:
        return None
    between = 0.0
    for g in set(groups):
        member = [v for gg, v in zip(groups, y) if gg == g]
        gm = sum(member) / len(member)
        between += len(member) * (gm - mean) ** 2
    return math.sqrt(min(max(between / total, 0.0), 1.0))


def brute_mixed_correlation(table):
    d = table.d
    out = [[1.0] * d for _ in range(d)]
    for i, j in combinations(range(d), 2):
        si, sj = table.schema[i], table.schema[j]
        ci = table.columns()[i].tolist()
        cj = table.columns()[j].tolist()
        if si.is_numeric and sj.is_numeric:
            v = brute_spearman(ci, cj)
        elif not si.is_numeric and not sj.is_numeric:
            v = brute_cramers_v(ci, cj)
        else:
            groups, y = (ci, cj) if not si.is_numeric else (cj, ci)
            v = brute_eta(groups, y)
        out[i][j] = out[j][i] = 0.0 if v is None else v
    return out


def brute_cmd(real, synth):
    a = brute_mixed_correlation(real)
    b = brute_mixed_correlation(synth)
    return math.sqrt(
        sum((a[i][j] - b[i][j]) ** 2 for i in range(real.d) for j in range(real.d))
    )


# -- pairwise TVD -------------------------------------------------------------------


def brute_bin(value, edges):
    """Right-closed bins: index = count of edges strictly below value."""
    k = 0
    for e in edges:
        if value > e:
            k += 1
    return k


def brute_discretize(table, reference, bins):
    cols = []
    for c in table.schema:
        values = table.column(c.name).tolist()
        if c.is_numeric:
            ref = reference.column(c.name)
            edges = np.unique(np.quantile(ref, np.arange(1, bins) / bins)).tolist()
            cols.append([brute_bin(v, edges) for v in values])
        else:
            cols.append(values)
    return cols


def brute_pair_tvd(ra, rb, sa, sb):
    pc, qc = {}, {}
    for a, b in zip(ra, rb):
        pc[(a, b)] = pc.get((a, b), 0) + 1
    for a, b in zip(sa, sb):
        qc[(a, b)] = qc.get((a, b), 0) + 1
    cells = set(pc) | set(qc)
    return 0.5 * sum(
        abs(pc.get(c, 0) / len(ra) - qc.get(c, 0) / len(sa)) for c in cells
    )


def brute_kmtvd(real, synth, bins=20):
    rd = brute_discretize(real, real, bins)
    sd = brute_discretize(synth, real, bins)
    tvds = [
        brute_pair_tvd(rd[i], rd[j], sd[i], sd[j])
        for i, j in combinations(range(real.d), 2)
    ]
    return sum(tvds) / len(tvds)


# -- Gower and NNAA -------------------------------------------------------------------


def brute_gower_ranges(tables):
    first = tables[0]
    ranges = []
    for j, c in enumerate(first.schema):
        if c.is_numeric:
            lo = min(min(t.columns()[j].tolist()) for t in tables)
            hi = max(max(t.columns()[j].tolist()) for t in tables)
            ranges.append(hi - lo)
        else:
            ranges.append(0.0)
    return ranges


def brute_gower(u, v, schema, ranges):
    total = 0.0
    for j, c in enumerate(schema):
        if c.is_numeric:
            if ranges[j] > 0:
                total += abs(u[j] - v[j]) / ranges[j]
        else:
            total += 1.0 if u[j] != v[j] else 0.0
    return total / len(schema)


def _rows(table):
    cols = [c.tolist() for c in table.columns()]
    return [tuple(col[i] for col in cols) for i in range(table.n)]


def brute_nnaa(real, synth):
    schema = real.schema
    ranges = brute_gower_ranges([real, synth])
    r_rows, s_rows = _rows(real), _rows(synth)
    n = len(r_rows)

    def nearest(row, others, skip=None):
        best = math.inf
        for k, other in enumerate(others):
            if k == skip:
                continue
            d = brute_gower(row, other, schema, ranges)
            if d < best:
                best = d
        return best

    term_real = 0
    for i, row in enumerate(r_rows):
        d_ts = nearest(row, s_rows)
        d_tt = nearest(row, r_rows, skip=i)
        term_real += 1 if d_ts > d_tt else 0
    term_synth = 0
    for j, row in enumerate(s_rows):
        d_st = nearest(row, r_rows)
        d_ss = nearest(row, s_rows, skip=j)
        term_synth += 1 if d_st > d_ss else 0
    return 0.5 * (term_real / n + term_synth / n)


# -- statistics ------------------------------------------------------------------------


def brute_wilcoxon_pratt(diffs):
    """Full 2^m sign enumeration with Pratt zero ranking."""
    d = list(diffs)
    if all(v == 0 for v in d):
        return 1.0
    ranks = _ranks_average([abs(v) for v in d])
    nz = [(ranks[i], d[i]) for i in range(len(d)) if d[i] != 0]
    m = len(nz)
    observed = sum(r for r, v in nz if v > 0)
    sums = []
    for mask in range(2 ** m):
        w = 0.0
        for k in range(m):
            if mask >> k & 1:
                w += nz[k][0]
        sums.append(w)
    eps = 1e-9
    p_le = sum(1 for w in sums if w <= observed + eps) / len(sums)
    p_ge = sum(1 for w in sums if w >= observed - eps) / len(sums)
    return min(1.0, 2.0 * min(p_le, p_ge))


def brute_hodges_lehmann(diffs):
    d = list(diffs)
    walsh = [(d[i] + d[j]) / 2 for i in range(len(d)) for j in range(i, len(d))]
    walsh.sort()
    mid = len(walsh) // 2
    if len(walsh) % 2:
        return walsh[mid]
    return (walsh[mid - 1] + walsh[mid]) / 2


def brute_holm(p_values):
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    best = 0.0
    for rank, idx in enumerate(order):
        candidate = min(1.0, (m - rank) * p_values[idx])
        best = max(best, candidate)
        adjusted[idx] = best
    return adjusted
