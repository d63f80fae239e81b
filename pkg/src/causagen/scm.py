"""Structural causal models: definition, sampling, interventions.

Equation vocabulary is deliberately small: Gaussian roots, linear
equations with Gaussian noise, conditional probability tables for
categorical nodes, and constants (the result of a do-intervention).
Noise streams are keyed by node name, so sampling is invariant to how the
equations happen to be ordered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, GraphError, SchemaError
from .graphs import CausalDag, topological_order
from .seeding import derive_seed, rng_for
from .table import ColumnSchema, Table, atomic_write_text

CPT_ROW_TOL = 1e-12


@dataclass(frozen=True)
class GaussianRoot:
    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0:
            raise DataError("gaussian_root std must be >= 0")

    parents: tuple[str, ...] = ()


@dataclass(frozen=True)
class Linear:
    """value = intercept + sum(coef * parent) + N(0, noise_std^2)."""

    parents: tuple[str, ...]
    coefficients: tuple[float, ...]
    noise_std: float
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.parents) != len(self.coefficients):
            raise DataError("linear equation needs one coefficient per parent")
        if self.noise_std < 0:
            raise DataError("noise_std must be >= 0")

    def coefficient_of(self, parent: str) -> float:
        return self.coefficients[self.parents.index(parent)]


@dataclass(frozen=True)
class CategoricalTable:
    """CPT over parent configurations.

    ``probs`` has one row per parent configuration in row-major order of
    the parents' category indices (parents in declared order) and one
    column per category of the target node.
    """

    parents: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise DataError("CPT must be a 2-d probability table")
        if (probs < 0).any():
            raise DataError("CPT probabilities must be non-negative")
        if np.abs(probs.sum(axis=1) - 1.0).max() > CPT_ROW_TOL:
            raise DataError("CPT rows must sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class Constant:
    """Fixed value; numeric for numeric nodes, category index otherwise."""

    value: float | int

    parents: tuple[str, ...] = ()


Equation = GaussianRoot | Linear | CategoricalTable | Constant


@dataclass(frozen=True)
class Intervention:
    node: str
    value: float | str


class Scm:
    """Nodes with schemas, a DAG, and one structural equation per node."""

    __slots__ = ("schema", "dag", "equations")

    def __init__(self, schema: list[ColumnSchema], edges, equations: dict[str, Equation]):
        self.schema = tuple(schema)
        names = [c.name for c in self.schema]
        self.dag = CausalDag(tuple(names), edges)
        if set(equations) != set(names):
            raise GraphError("equations must cover exactly the SCM nodes")
        self.equations = dict(equations)
        by_name = {c.name: c for c in self.schema}
        for v, eq in self.equations.items():
            if set(eq.parents) != set(self.dag.parents(v)):
                raise GraphError(
                    f"equation parents of {v!r} do not match graph parents"
                )
            self._check_kinds(by_name, v, eq)

    def _check_kinds(self, by_name, v, eq):
        col = by_name[v]
        if isinstance(eq, (GaussianRoot, Linear)):
            if not col.is_numeric:
                raise SchemaError(f"{v!r} is categorical but has a numeric equation")
            if isinstance(eq, Linear):
                for p in eq.parents:
                    if not by_name[p].is_numeric:
                        raise SchemaError(
                            f"linear equation of {v!r} uses categorical parent {p!r}"
                        )
        elif isinstance(eq, CategoricalTable):
            if col.is_numeric:
                raise SchemaError(f"{v!r} is numeric but has a CPT equation")
            expected_rows = 1
            for p in eq.parents:
                if by_name[p].is_numeric:
                    raise SchemaError(f"CPT of {v!r} uses numeric parent {p!r}")
                expected_rows *= len(by_name[p].categories)
            if eq.probs.shape != (expected_rows, len(col.categories)):
                raise DataError(
                    f"CPT of {v!r} has shape {eq.probs.shape}, "
                    f"expected {(expected_rows, len(col.categories))}"
                )
        elif isinstance(eq, Constant):
            if col.is_numeric:
                if not np.isfinite(float(eq.value)):
                    raise DataError(f"constant for {v!r} must be finite")
            else:
                idx = int(eq.value)
                if not 0 <= idx < len(col.categories):
                    raise SchemaError(f"constant category index out of range for {v!r}")

    def column_schema(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise GraphError(f"unknown node {name!r}")

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.dag.nodes


def builtin_collider_scm(noise_std: float = 1e-5) -> Scm:
    """Four-variable collider benchmark: X3 -> X2 -> X1 <- X0.

    X0 and X3 are standard-normal roots, X2 = 0.5*X3 + eps,
    X1 = 5.0*X0 + 10.0*X2 + eps. X0 and X2 are d-separated, so any
    correlation between them in synthetic data is spurious.
    """
    if noise_std <= 0:
        raise DataError("noise_std must be > 0")
    schema = [ColumnSchema(f"X{i}", "numeric") for i in range(4)]
    edges = [("X0", "X1"), ("X2", "X1"), ("X3", "X2")]
    equations = {
        "X0": GaussianRoot(0.0, 1.0),
        "X3": GaussianRoot(0.0, 1.0),
        "X2": Linear(("X3",), (0.5,), noise_std),
        "X1": Linear(("X0", "X2"), (5.0, 10.0), noise_std),
    }
    return Scm(schema, edges, equations)


BUILTIN_SCMS = {"collider": builtin_collider_scm}


def sample(scm: Scm, n: int, seed: int) -> Table:
    """Draw n observational rows by evaluating equations topologically."""
    if n < 1:
        raise DataError("n must be >= 1")
    values: dict[str, np.ndarray] = {}
    for v in topological_order(scm.dag):
        eq = scm.equations[v]
        rng = rng_for("scm", seed, v)
        if isinstance(eq, GaussianRoot):
            col = eq.mean + eq.std * rng.standard_normal(n)
        elif isinstance(eq, Linear):
            col = np.full(n, eq.intercept, dtype=np.float64)
            for p, coef in zip(eq.parents, eq.coefficients):
                col += coef * values[p]
            col += eq.noise_std * rng.standard_normal(n)
        elif isinstance(eq, CategoricalTable):
            if eq.parents:
                dims = [len(scm.column_schema(p).categories) for p in eq.parents]
                config = np.ravel_multi_index(
                    tuple(values[p] for p in eq.parents), dims
                )
            else:
                config = np.zeros(n, dtype=np.int64)
            p_rows = eq.probs[config]
            u = rng.random(n)
            col = (np.cumsum(p_rows, axis=1) < u[:, None]).sum(axis=1)
            col = np.minimum(col, eq.probs.shape[1] - 1)
        elif isinstance(eq, Constant):
            col_schema = scm.column_schema(v)
            if col_schema.is_numeric:
                col = np.full(n, float(eq.value))
            else:
                col = np.full(n, int(eq.value), dtype=np.int64)
        else:  # pragma: no cover - closed union
            raise TypeError(f"unknown equation type {type(eq).__name__}")
        values[v] = col
    return Table(list(scm.schema), [values[c.name] for c in scm.schema])


def intervene(scm: Scm, iv: Intervention) -> Scm:
    """do(node = value): drop in-edges of node, fix its equation."""
    col = scm.column_schema(iv.node)
    if col.is_numeric:
        value: float | int = float(iv.value)
    else:
        if isinstance(iv.value, str):
            if iv.value not in col.categories:
                raise SchemaError(f"unknown category {iv.value!r} for {iv.node!r}")
            value = col.categories.index(iv.value)
        else:
            value = int(iv.value)
    edges = [e for e in scm.dag.edges if e[1] != iv.node]
    equations = dict(scm.equations)
    equations[iv.node] = Constant(value)
    return Scm(list(scm.schema), edges, equations)


def interventional_arms(
    scm: Scm,
    treatment: str,
    x0: float | str,
    x1: float | str,
    n_per_arm: int,
    seed: int,
) -> Table:
    """Balanced two-arm interventional sample: n_per_arm rows under
    do(treatment=x0) followed by n_per_arm rows under do(treatment=x1)."""
    if n_per_arm < 1:
        raise DataError("n_per_arm must be >= 1")
    parts = []
    for arm_index, value in enumerate((x0, x1)):
        arm_scm = intervene(scm, Intervention(treatment, value))
        parts.append(sample(arm_scm, n_per_arm, derive_seed("arm", seed, arm_index)))
    return concat_tables(parts)


def concat_tables(tables: list[Table]) -> Table:
    first = tables[0]
    for t in tables[1:]:
        if t.schema != first.schema:
            raise SchemaError("cannot concatenate tables with different schemas")
    cols = [
        np.concatenate([t.columns()[j] for t in tables]) for j in range(first.d)
    ]
    return Table(list(first.schema), cols)


def analytic_ate(
    scm: Scm, treatment: str, outcome: str, x0: float, x1: float
) -> float:
    """Exact ATE for linear path structure: sum over directed paths of the
    product of edge coefficients, times (x1 - x0)."""
    scm.column_schema(outcome)  # validates the node exists
    if not scm.column_schema(treatment).is_numeric:
        raise GraphError("analytic ATE requires a numeric treatment")
    if treatment == outcome:
        return float(x1) - float(x0)

    children: dict[str, list[str]] = {v: [] for v in scm.nodes}
    for u, v in scm.dag.edges:
        children[u].append(v)

    # restrict traversal to nodes with a directed path to the outcome
    reaches = {outcome}
    for v in reversed(topological_order(scm.dag)):
        if any(c in reaches for c in children[v]):
            reaches.add(v)

    memo: dict[str, float] = {outcome: 1.0}

    def total_effect(v: str) -> float:
        if v in memo:
            return memo[v]
        acc = 0.0
        for c in children[v]:
            if c not in reaches:
                continue
            eq = scm.equations[c]
            if not isinstance(eq, Linear):
                raise GraphError(
                    f"non-linear equation at {c!r} on a {treatment!r}->{outcome!r} path"
                )
            acc += eq.coefficient_of(v) * total_effect(c)
        memo[v] = acc
        return acc

    if treatment not in reaches:
        return 0.0
    return total_effect(treatment) * (float(x1) - float(x0))


# -- SCM file I/O ----------------------------------------------------------


def scm_to_obj(scm: Scm) -> dict:
    equations = {}
    for v, eq in scm.equations.items():
        if isinstance(eq, GaussianRoot):
            equations[v] = {"type": "gaussian_root", "mean": eq.mean, "std": eq.std}
        elif isinstance(eq, Linear):
            equations[v] = {
                "type": "linear",
                "parents": list(eq.parents),
                "coefficients": list(eq.coefficients),
                "intercept": eq.intercept,
                "noise_std": eq.noise_std,
            }
        elif isinstance(eq, CategoricalTable):
            dims = [len(scm.column_schema(p).categories) for p in eq.parents]
            rows = []
            for flat in range(eq.probs.shape[0]):
                idx = np.unravel_index(flat, dims) if dims else ()
                given = [
                    scm.column_schema(p).categories[i]
                    for p, i in zip(eq.parents, idx)
                ]
                rows.append({"given": given, "p": eq.probs[flat].tolist()})
            equations[v] = {
                "type": "categorical_table",
                "parents": list(eq.parents),
                "table": rows,
            }
        elif isinstance(eq, Constant):
            col = scm.column_schema(v)
            value = eq.value if col.is_numeric else col.categories[int(eq.value)]
            equations[v] = {"type": "constant", "value": value}
    return {
        "nodes": [
            {"name": c.name, "kind": c.kind, "categories": list(c.categories)}
            for c in scm.schema
        ],
        "edges": sorted([u, v] for u, v in scm.dag.edges),
        "equations": equations,
    }


def scm_from_obj(obj) -> Scm:
    schema = [
        ColumnSchema(d["name"], d["kind"], tuple(d.get("categories", ())))
        for d in obj["nodes"]
    ]
    by_name = {c.name: c for c in schema}
    equations: dict[str, Equation] = {}
    for v, spec in obj["equations"].items():
        kind = spec["type"]
        if kind == "gaussian_root":
            equations[v] = GaussianRoot(float(spec["mean"]), float(spec["std"]))
        elif kind == "linear":
            equations[v] = Linear(
                tuple(spec["parents"]),
                tuple(spec["coefficients"]),
                float(spec["noise_std"]),
                float(spec.get("intercept", 0.0)),
            )
        elif kind == "categorical_table":
            parents = tuple(spec["parents"])
            dims = [len(by_name[p].categories) for p in parents]
            n_rows = int(np.prod(dims)) if dims else 1
            probs = np.full((n_rows, len(by_name[v].categories)), np.nan)
            for row in spec["table"]:
                idx = tuple(
                    by_name[p].categories.index(lab)
                    for p, lab in zip(parents, row["given"])
                )
                flat = int(np.ravel_multi_index(idx, dims)) if dims else 0
                probs[flat] = row["p"]
            if np.isnan(probs).any():
                raise DataError(f"CPT of {v!r} does not cover all parent configs")
            equations[v] = CategoricalTable(parents, probs)
        elif kind == "constant":
            value = spec["value"]
            if not by_name[v].is_numeric and isinstance(value, str):
                value = by_name[v].categories.index(value)
            equations[v] = Constant(value)
        else:
            raise DataError(f"unknown equation type {kind!r}")
    return Scm(schema, [tuple(e) for e in obj["edges"]], equations)


def load_scm(path) -> Scm:
    with open(path, encoding="utf-8") as fh:
        return scm_from_obj(json.load(fh))


def save_scm(path, scm: Scm) -> None:
    atomic_write_text(path, json.dumps(scm_to_obj(scm), indent=2) + "\n")
