"""Mixed-type table representation, schema and CSV/JSON I/O, splitting.

A Table is immutable after construction: column arrays are stored with the
numpy writeable flag cleared, so tables can be shared freely across
threads. Numeric columns are float64; categorical columns store int64
indices into the schema's category list.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataError, SchemaError
from .seeding import rng_for

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSchema:
    """Name, kind and (for categorical columns) the closed category set."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == NUMERIC and self.categories:
            raise SchemaError(f"numeric column {self.name!r} must not declare categories")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"categorical column {self.name!r} needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"duplicate category labels in column {self.name!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


class Table:
    """Rectangular, fully observed, column-ordered dataset."""

    __slots__ = ("schema", "_columns")

    def __init__(self, schema: list[ColumnSchema], columns: list[np.ndarray]):
        schema = list(schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in table schema")
        if len(columns) != len(schema):
            raise SchemaError("column count does not match schema")
        n = len(columns[0]) if columns else 0
        stored = []
        for col_schema, values in zip(schema, columns):
            arr = np.asarray(values)
            if arr.ndim != 1:
                raise DataError(f"column {col_schema.name!r} is not one-dimensional")
            if len(arr) != n:
                raise DataError("columns have unequal lengths")
            if col_schema.is_numeric:
                arr = arr.astype(np.float64)
                if not np.isfinite(arr).all():
                    raise DataError(f"non-finite value in numeric column {col_schema.name!r}")
            else:
                arr = arr.astype(np.int64)
                if arr.size and (arr.min() < 0 or arr.max() >= len(col_schema.categories)):
                    raise SchemaError(
                        f"category index out of range in column {col_schema.name!r}"
                    )
            arr.setflags(write=False)
            stored.append(arr)
        self.schema = tuple(schema)
        self._columns = tuple(stored)

    # -- basic accessors -------------------------------------------------

    @property
    def n(self) -> int:
        return len(self._columns[0]) if self._columns else 0

    @property
    def d(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.schema):
            if c.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    def column_schema(self, name: str) -> ColumnSchema:
        return self.schema[self.column_index(name)]

    def column(self, name: str) -> np.ndarray:
        return self._columns[self.column_index(name)]

    def columns(self) -> tuple[np.ndarray, ...]:
        return self._columns

    # -- derived tables --------------------------------------------------

    def take(self, row_indices) -> "Table":
        idx = np.asarray(row_indices, dtype=np.int64)
        return Table(list(self.schema), [col[idx] for col in self._columns])

    def content_hash(self) -> str:
        """Stable digest of schema and cell values (pairing checks)."""
        h = hashlib.blake2b(digest_size=16)
        h.update(json.dumps(schema_to_obj(list(self.schema))).encode())
        for col in self._columns:
            h.update(col.tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Table):
            return NotImplemented
        return self.schema == other.schema and all(
            np.array_equal(a, b) for a, b in zip(self._columns, other._columns)
        )

    def __hash__(self):
        return hash(self.content_hash())

    def __repr__(self):
        return f"Table(n={self.n}, columns={self.names})"


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test split parameters.

    The test set depends on ``master_seed`` only; the train set also
    depends on ``iteration``, so resampling iterations share one fixed
    test set and draw disjoint, reproducible train sets.
    """

    test_size: int
    train_size: int
    master_seed: int
    iteration: int = 0


def fixed_split(pool: Table, spec: SplitSpec) -> tuple[Table, Table]:
    """Split ``pool`` into (train, test) per ``spec``. Rows keep pool order."""
    if spec.test_size + spec.train_size > pool.n:
        raise DataError(
            f"pool has {pool.n} rows, need {spec.test_size + spec.train_size}"
        )
    test_rng = rng_for("split-test", spec.master_seed)
    perm = test_rng.permutation(pool.n)
    test_idx = np.sort(perm[: spec.test_size])
    remaining = np.sort(perm[spec.test_size :])
    train_rng = rng_for("split-train", spec.master_seed, spec.iteration)
    pick = train_rng.choice(len(remaining), size=spec.train_size, replace=False)
    train_idx = np.sort(remaining[pick])
    return pool.take(train_idx), pool.take(test_idx)


def reorder_columns(t: Table, order: list[str]) -> Table:
    """Permute columns (schema and cells); rows are untouched."""
    if sorted(order) != sorted(t.names):
        raise SchemaError(f"{order!r} is not a permutation of {t.names!r}")
    return Table(
        [t.column_schema(name) for name in order],
        [t.column(name) for name in order],
    )


# -- schema file I/O -----------------------------------------------------


def schema_to_obj(schema: list[ColumnSchema]) -> list[dict]:
    return [
        {"name": c.name, "kind": c.kind, "categories": list(c.categories)}
        for c in schema
    ]


def schema_from_obj(obj) -> list[ColumnSchema]:
    try:
        return [
            ColumnSchema(d["name"], d["kind"], tuple(d.get("categories", ())))
            for d in obj
        ]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema object: {exc}") from exc


def load_schema(path) -> list[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        return schema_from_obj(json.load(fh))


def save_schema(path, schema: list[ColumnSchema]) -> None:
    atomic_write_text(path, json.dumps(schema_to_obj(schema), indent=2) + "\n")


# -- CSV I/O ---------------------------------------------------------------


def load_table(path, schema: list[ColumnSchema]) -> Table:
    """Read an RFC-4180 CSV with header into a Table.

    The header must match the schema names in order. Categorical cells may
    be category labels; pre-encoded integer columns should be declared
    numeric in the schema instead.
    """
    names = [c.name for c in schema]
    lookups = [
        {label: i for i, label in enumerate(c.categories)} if not c.is_numeric else None
        for c in schema
    ]
    raw: list[list] = [[] for _ in schema]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header required") from None
        if header != names:
            raise SchemaError(f"{path}: header {header!r} does not match schema {names!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(schema):
                raise DataError(f"{path}:{lineno}: ragged row ({len(row)} cells)")
            for j, cell in enumerate(row):
                if lookups[j] is None:
                    try:
                        raw[j].append(float(cell))
                    except ValueError:
                        raise DataError(
                            f"{path}:{lineno}: non-numeric cell {cell!r} in column {names[j]!r}"
                        ) from None
                else:
                    try:
                        raw[j].append(lookups[j][cell])
                    except KeyError:
                        raise SchemaError(
                            f"{path}:{lineno}: unknown category {cell!r} in column {names[j]!r}"
                        ) from None
    return Table(list(schema), [np.asarray(col) for col in raw])


def save_table(path, t: Table) -> None:
    """Inverse of load_table; numeric cells use shortest round-trip repr."""
    rows = []
    decoded = []
    for c, col in zip(t.schema, t.columns()):
        if c.is_numeric:
            decoded.append([repr(v) for v in col.tolist()])
        else:
            decoded.append([c.categories[i] for i in col.tolist()])
    for i in range(t.n):
        rows.append([decoded[j][i] for j in range(t.d)])
    _atomic_write(path, lambda fh: _write_csv(fh, t.names, rows))


def _write_csv(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _atomic_write(path, write_fn) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write(path, lambda fh: fh.write(text))
