import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causagen import (
    ColumnSchema,
    DataError,
    Table,
    cmd,
    delta_ate,
    evaluate_tables,
    kmtvd,
    mixed_correlation,
    nnaa,
    sample,
    spurious_report,
)
from causagen.metrics import (
    ate_from_table,
    correlation_ratio,
    gower,
    gower_ranges,
    spearman,
)

from conftest import random_mixed_table
from oracles import (
    brute_cmd,
    brute_eta,
    brute_gower,
    brute_gower_ranges,
    brute_kmtvd,
    brute_nnaa,
)


def _numeric_table(**cols):
    names = list(cols)
    return Table(
        [ColumnSchema(n, "numeric") for n in names],
        [np.asarray(cols[n], dtype=float) for n in names],
    )


# -- mixed correlation -----------------------------------------------------------


def test_identical_categorical_pair_v_is_one():
    schema = [
        ColumnSchema("a", "categorical", ("x", "y")),
        ColumnSchema("b", "categorical", ("x", "y")),
    ]
    col = np.asarray([0, 1, 0, 1, 1, 0])
    t = Table(schema, [col, col.copy()])
    m = mixed_correlation(t)
    assert m.values[0, 1] == pytest.approx(1.0)
    assert m.methods[0][1] == "cramers_v"


def test_strictly_increasing_spearman_is_one():
    x = np.asarray([1.0, 2.0, 5.0, 9.0])
    t = _numeric_table(x=x, y=x**3)
    m = mixed_correlation(t)
    assert m.values[0, 1] == pytest.approx(1.0)
    assert m.methods[0][1] == "spearman"


def test_eta_hand_computed_examples():
    # groups a:(0,0) b:(1,1): between-var equals total-var -> eta 1
    assert correlation_ratio(
        np.asarray([0, 0, 1, 1]), np.asarray([0.0, 0.0, 1.0, 1.0])
    ) == pytest.approx(1.0)
    # equal group means -> eta 0
    assert correlation_ratio(
        np.asarray([0, 0, 1, 1]), np.asarray([0.0, 1.0, 1.0, 0.0])
    ) == pytest.approx(0.0)
    assert brute_eta([0, 0, 1, 1], [0.0, 0.0, 1.0, 1.0]) == pytest.approx(1.0)


def test_constant_column_flagged_as_zero():
    t = _numeric_table(x=[1.0, 1.0, 1.0], y=[1.0, 2.0, 3.0])
    m = mixed_correlation(t)
    assert m.values[0, 1] == 0.0
    assert (0, 1) in m.constant_pairs


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_spearman_invariant_under_monotone_transform(data):
    n = data.draw(st.integers(5, 40))
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    x = rng.normal(size=n)
    y = rng.normal(size=n)
    base = spearman(x, y)
    transformed = spearman(np.exp(x), y**3)  # strictly monotone maps
    assert transformed == pytest.approx(base, abs=1e-12)


# -- CMD ---------------------------------------------------------------------------


def test_cmd_identity_is_zero(mixed_table):
    assert cmd(mixed_table, mixed_table) == 0.0


def test_cmd_two_column_spearman_flip():
    from itertools import permutations

    x = np.arange(5.0)
    real = _numeric_table(x=x, y=x.copy())  # spearman 1
    y = next(
        np.asarray(p, dtype=float)
        for p in permutations(range(5))
        if abs(spearman(x, np.asarray(p, dtype=float))) < 1e-12
    )
    synth = _numeric_table(x=x, y=y)  # spearman 0
    assert cmd(real, synth) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_cmd_norm_upper_bound():
    # d=4: off-diagonal entries differ by at most 2 each
    rng = np.random.default_rng(0)
    real = random_mixed_table(rng, 40, 4)
    synth = Table(
        list(real.schema),
        [
            rng.normal(size=40) if s.is_numeric
            else rng.integers(0, len(s.categories), size=40)
            for s in real.schema
        ],
    )
    assert cmd(real, synth) <= np.sqrt(12 * 4)


def test_cmd_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(5, 60))
        d = int(rng.integers(2, 6))
        real = random_mixed_table(rng, n, d)
        synth = Table(
            list(real.schema),
            [
                col + rng.normal(size=n) * 0.5 if s.is_numeric
                else rng.integers(0, len(s.categories), size=n)
                for s, col in zip(real.schema, real.columns())
            ],
        )
        assert cmd(real, synth) == pytest.approx(brute_cmd(real, synth), abs=1e-12)


# -- kmtvd ---------------------------------------------------------------------------


def test_kmtvd_identity_zero(mixed_table):
    assert kmtvd(mixed_table, mixed_table) == 0.0


def test_kmtvd_disjoint_supports_is_one():
    # categorical pairs with disjoint category usage share no joint cell
    schema = [
        ColumnSchema("a", "categorical", ("p", "q", "r", "s")),
        ColumnSchema("b", "categorical", ("p", "q", "r", "s")),
    ]
    real = Table(schema, [np.asarray([0, 1] * 5), np.asarray([0, 1] * 5)])
    synth = Table(schema, [np.asarray([2, 3] * 5), np.asarray([2, 3] * 5)])
    assert kmtvd(real, synth) == pytest.approx(1.0)


def test_kmtvd_displaced_numeric_lands_in_top_bin():
    # numeric columns are binned by the REAL table's quantiles, so far
    # displaced synthetic mass collapses into the top bin and the TVD is
    # 1 minus the real mass already in that joint cell
    real = _numeric_table(x=np.arange(10.0), y=np.arange(10.0))
    synth = _numeric_table(x=np.arange(10.0) + 100, y=np.arange(10.0) + 100)
    assert kmtvd(real, synth) == pytest.approx(0.9)


def test_kmtvd_four_row_hand_example():
    schema = [
        ColumnSchema("c", "categorical", ("a", "b")),
        ColumnSchema("x", "numeric"),
    ]
    real = Table(schema, [np.asarray([0, 0, 1, 1]), np.asarray([0.0, 0, 1, 1])])
    synth = Table(schema, [np.asarray([0, 0, 1, 1]), np.asarray([1.0, 1, 0, 0])])
    # joint cells fully swapped -> TVD 1 for the only pair
    assert kmtvd(real, synth) == pytest.approx(1.0)


def test_kmtvd_matches_brute_force_oracle():
    rng = np.random.default_rng(13)
    for _ in range(25):
        n = int(rng.integers(4, 50))
        d = int(rng.integers(2, 6))
        real = random_mixed_table(rng, n, d)
        synth = Table(
            list(real.schema),
            [
                rng.normal(size=n) if s.is_numeric
                else rng.integers(0, len(s.categories), size=n)
                for s in real.schema
            ],
        )
        assert kmtvd(real, synth) == pytest.approx(
            brute_kmtvd(real, synth), abs=1e-12
        )


def test_kmtvd_needs_two_columns():
    t = _numeric_table(x=[1.0, 2.0])
    with pytest.raises(DataError):
        kmtvd(t, t)


def test_kmtvd_general_subset_size():
    rng = np.random.default_rng(31)
    real = random_mixed_table(rng, 40, 4)
    synth = _perturb(rng, real)
    # k = d: single joint histogram over all columns
    assert 0.0 <= kmtvd(real, synth, k=4) <= 1.0
    assert kmtvd(real, real, k=3) == 0.0
    # identity at the aggregation level: k=1 is the mean marginal TVD
    assert kmtvd(real, real, k=1) == 0.0
    with pytest.raises(DataError):
        kmtvd(real, synth, k=5)


def _perturb(rng, real):
    return Table(
        list(real.schema),
        [
            rng.normal(size=real.n) if s.is_numeric
            else rng.integers(0, len(s.categories), size=real.n)
            for s in real.schema
        ],
    )


# -- Gower / NNAA -----------------------------------------------------------------------


def test_gower_identical_rows_zero(mixed_table):
    ranges = gower_ranges([mixed_table, mixed_table])
    row = tuple(col[0] for col in mixed_table.columns())
    assert gower(row, row, mixed_table.schema, ranges) == 0.0


def test_gower_all_categorical_mismatch_is_one():
    schema = [
        ColumnSchema("a", "categorical", ("x", "y")),
        ColumnSchema("b", "categorical", ("x", "y")),
    ]
    assert gower((0, 0), (1, 1), schema, np.zeros(2)) == 1.0


def test_gower_mixed_hand_example():
    schema = [
        ColumnSchema("x", "numeric"),
        ColumnSchema("c", "categorical", ("u", "v")),
    ]
    # numeric diff 2 over range 4 plus categorical mismatch: (0.5 + 1)/2
    assert gower((0.0, 0), (2.0, 1), schema, np.asarray([4.0, 0.0])) == 0.75


def test_nnaa_copy_detection(mixed_table):
    assert nnaa(mixed_table, mixed_table) == 0.0


def test_nnaa_displaced_synth_is_one():
    real = _numeric_table(x=np.arange(20.0), y=np.arange(20.0))
    synth = _numeric_table(x=np.arange(20.0) + 1e6, y=np.arange(20.0) + 1e6)
    assert nnaa(real, synth) == 1.0


def test_nnaa_independent_draws_near_half(collider_scm):
    a = sample(collider_scm, 1000, seed=1)
    b = sample(collider_scm, 1000, seed=2)
    assert abs(nnaa(a, b) - 0.5) < 0.05


def test_nnaa_symmetric(mixed_table):
    rng = np.random.default_rng(3)
    other = Table(
        list(mixed_table.schema),
        [
            rng.normal(40, 10, size=50),
            rng.integers(0, 3, size=50),
            rng.normal(size=50),
        ],
    )
    assert nnaa(mixed_table, other) == nnaa(other, mixed_table)


def test_nnaa_matches_brute_force_oracle():
    rng = np.random.default_rng(17)
    for _ in range(10):
        n = int(rng.integers(3, 40))
        d = int(rng.integers(1, 5))
        real = random_mixed_table(rng, n, d)
        synth = Table(
            list(real.schema),
            [
                rng.normal(size=n) if s.is_numeric
                else rng.integers(0, len(s.categories), size=n)
                for s in real.schema
            ],
        )
        assert nnaa(real, synth) == pytest.approx(
            brute_nnaa(real, synth), abs=1e-12
        )


def test_nnaa_size_mismatch():
    a = _numeric_table(x=[1.0, 2.0, 3.0])
    b = _numeric_table(x=[1.0, 2.0])
    with pytest.raises(DataError):
        nnaa(a, b)


def test_gower_matrix_matches_brute_force():
    rng = np.random.default_rng(23)
    from causagen.metrics import _gower_matrix

    real = random_mixed_table(rng, 30, 4)
    synth = Table(
        list(real.schema),
        [
            rng.normal(size=30) if s.is_numeric
            else rng.integers(0, len(s.categories), size=30)
            for s in real.schema
        ],
    )
    ranges = gower_ranges([real, synth])
    fast = _gower_matrix(real, synth, ranges)
    b_ranges = brute_gower_ranges([real, synth])
    r_rows = [tuple(c[i] for c in real.columns()) for i in range(real.n)]
    s_rows = [tuple(c[i] for c in synth.columns()) for i in range(synth.n)]
    for i in range(real.n):
        for j in range(synth.n):
            assert fast[i, j] == pytest.approx(
                brute_gower(r_rows[i], s_rows[j], real.schema, b_ranges), abs=1e-12
            )


# -- spurious correlations and ATE ----------------------------------------------------


def test_spurious_identity_pairs():
    x = np.random.default_rng(0).normal(size=100)
    t = _numeric_table(x=x, y=x.copy(), z=-x)
    report = spurious_report(t, [("x", "y"), ("x", "z")])
    assert report[0][1] == pytest.approx(1.0)
    assert report[1][1] == pytest.approx(-1.0)


def test_spurious_constant_marker():
    t = _numeric_table(x=[1.0, 1.0, 1.0], y=[1.0, 2.0, 3.0])
    assert spurious_report(t, [("x", "y")])[0][1] is None


def test_spurious_test_set_small(collider_scm):
    test = sample(collider_scm, 2000, seed=100)
    report = spurious_report(test, [("X0", "X3"), ("X0", "X2")])
    for _, value in report:
        assert abs(value) < 0.08


def test_ate_from_table_basic():
    t = _numeric_table(
        treat=[0.0, 0, 0, 1, 1, 1], y=[0.0, 1.0, -1.0, 10.0, 11.0, 9.0]
    )
    assert ate_from_table(t, "treat", "y", 0.0, 1.0) == pytest.approx(10.0)
    assert delta_ate(10.0, 9.0) == pytest.approx(1.0)


def test_ate_nearest_assignment():
    t = _numeric_table(treat=[0.1, -0.2, 0.9, 1.2], y=[0.0, 2.0, 10.0, 12.0])
    assert ate_from_table(t, "treat", "y", 0.0, 1.0, assign="nearest") == 10.0


def test_ate_missing_arm():
    t = _numeric_table(treat=[0.0, 0.0], y=[1.0, 2.0])
    with pytest.raises(DataError):
        ate_from_table(t, "treat", "y", 0.0, 1.0)


def test_delta_ate_identity(collider_scm):
    from causagen import interventional_arms

    t = interventional_arms(collider_scm, "X2", 0.0, 1.0, 500, seed=9)
    a = ate_from_table(t, "X2", "X1", 0.0, 1.0)
    assert delta_ate(a, a) == 0.0
    assert abs(a - 10.0) < 0.5


# -- report and invariances --------------------------------------------------------------


def test_evaluate_tables_identity(mixed_table):
    report = evaluate_tables(mixed_table, mixed_table)
    assert report.cmd == 0.0
    assert report.kmtvd == 0.0
    assert report.nnaa == 0.0


def test_metrics_row_order_invariant(collider_scm):
    real = sample(collider_scm, 300, seed=5)
    synth = sample(collider_scm, 300, seed=6)
    perm = np.random.default_rng(0).permutation(300)
    real_p = real.take(perm)
    synth_p = synth.take(np.random.default_rng(1).permutation(300))
    assert cmd(real, synth) == pytest.approx(cmd(real_p, synth_p), abs=1e-12)
    assert kmtvd(real, synth) == pytest.approx(kmtvd(real_p, synth_p), abs=1e-12)
    assert nnaa(real, synth) == pytest.approx(nnaa(real_p, synth_p), abs=1e-12)
