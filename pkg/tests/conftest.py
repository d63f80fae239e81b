import numpy as np
import pytest

from causagen import ColumnSchema, Table, builtin_collider_scm


@pytest.fixture
def collider_scm():
    return builtin_collider_scm(1e-5)


@pytest.fixture
def mixed_table():
    schema = [
        ColumnSchema("age", "numeric"),
        ColumnSchema("group", "categorical", ("a", "b", "c")),
        ColumnSchema("score", "numeric"),
    ]
    rng = np.random.default_rng(7)
    return Table(
        schema,
        [
            rng.normal(40, 10, size=50),
            rng.integers(0, 3, size=50),
            rng.normal(0, 1, size=50),
        ],
    )


def random_mixed_table(rng, n, d):
    """Random table with a random mix of numeric/categorical columns."""
    schema, cols = [], []
    for j in range(d):
        if rng.random() < 0.5:
            schema.append(ColumnSchema(f"c{j}", "numeric"))
            cols.append(rng.normal(size=n) * rng.uniform(0.5, 3))
        else:
            k = int(rng.integers(2, 5))
            schema.append(
                ColumnSchema(f"c{j}", "categorical", tuple(f"v{i}" for i in range(k)))
            )
            cols.append(rng.integers(0, k, size=n))
    return Table(schema, cols)
