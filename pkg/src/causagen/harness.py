"""End-to-end experiment protocols.

Two experiment families share one resampling backbone:

* quality - fixed test set, per-iteration train draws, synthetic data of
  test-set size per strategy, distributional metrics against the test set;
* treatment effect - balanced two-arm interventional pools, per-iteration
  balanced train sets, absolute ATE error of the synthetic data against
  the test-set ATE.

Every iteration derives all of its randomness from (master seed, purpose,
indices), so a configuration maps to exactly one records table no matter
how many worker threads execute it. Strategies within an iteration share
the identical train table: comparisons downstream are paired by design.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bridge_client import BridgeSampler
from .errors import CausagenError, DataError, GraphError
from .generate import GenerationRequest, generate
from .graphs import (
    CausalDag,
    build_plan,
    load_graph,
    minimal_cpdag,
    require_dag,
    reverse_topological_order,
    topological_order,
)
from .discovery import pc_stable
from .metrics import ALL_METRICS, ate_from_table, delta_ate, evaluate_tables
from .samplers import make_sampler
from .scm import (
    BUILTIN_SCMS,
    Intervention,
    Scm,
    concat_tables,
    intervene,
    load_scm,
    sample,
)
from .seeding import derive_seed, rng_for
from .stats import (
    ComparisonResult,
    hl_confidence_interval,
    hodges_lehmann,
    holm,
    median_range_ci,
    wilcoxon_pratt,
)
from .table import SplitSpec, Table, fixed_split, load_schema, load_table

ORDERINGS = ("original", "topological", "reverse")
GRAPH_SOURCES = ("true-dag", "minimal-cpdag", "discovered-cpdag")


@dataclass(frozen=True)
class StrategySpec:
    """One generation arm: conditioning strategy plus its knobs."""

    strategy: str
    ordering: str = "original"  # column ordering, vanilla only
    graph_source: str = "true-dag"

    def __post_init__(self):
        if self.strategy not in ("vanilla", "dag", "cpdag"):
            raise DataError(f"unknown strategy {self.strategy!r}")
        if self.ordering not in ORDERINGS:
            raise DataError(f"unknown ordering {self.ordering!r}")
        if self.graph_source not in GRAPH_SOURCES:
            raise DataError(f"unknown graph source {self.graph_source!r}")
        if self.strategy == "dag" and self.graph_source != "true-dag":
            raise DataError("dag strategy uses the true graph")
        if self.strategy == "cpdag" and self.graph_source == "true-dag":
            raise DataError("cpdag strategy needs minimal-cpdag or discovered-cpdag")

    @property
    def label(self) -> str:
        if self.strategy == "vanilla":
            return f"vanilla-{self.ordering}"
        if self.strategy == "dag":
            return "dag"
        return "cpdag-" + self.graph_source.removesuffix("-cpdag")


@dataclass(frozen=True)
class BuiltinSource:
    """A built-in SCM as data source; the label names the dataset in records."""

    name: str = "collider"
    noise_std: float = 1e-5
    label: str = ""

    def resolved_label(self) -> str:
        return self.label or f"{self.name}-{self.noise_std:g}"


@dataclass(frozen=True)
class ExternalSource:
    """CSV + schema (+ optional true-graph JSON or SCM JSON) on disk."""

    data_path: str
    schema_path: str
    graph_path: str | None = None
    scm_path: str | None = None
    label: str = "external"

    def resolved_label(self) -> str:
        return self.label


@dataclass(frozen=True)
class AteSpec:
    treatment: str
    outcome: str
    x0: float
    x1: float


@dataclass(frozen=True)
class ExperimentConfig:
    source: BuiltinSource | ExternalSource
    strategies: tuple[StrategySpec, ...]
    train_sizes: tuple[int, ...]
    iterations: int = 100
    test_size: int = 2000
    sampler: str = "cart"
    master_seed: int = 0
    permutations: int = 3
    metrics: tuple[str, ...] = ALL_METRICS
    spurious_pairs: tuple[tuple[str, str], ...] = ()
    pool_size: int = 6000
    discovery_alpha: float = 0.05
    randomize_original_if_causal: bool = False
    bridge_command: str | None = None
    ate: AteSpec | None = None

    def __post_init__(self):
        if not self.strategies:
            raise DataError("need at least one strategy")
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        unknown = set(self.metrics) - set(ALL_METRICS)
        if unknown:
            raise DataError(f"unknown metrics {sorted(unknown)!r}")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise DataError(f"duplicate strategy labels in {labels!r}")


@dataclass(frozen=True)
class RunRecord:
    """One (strategy x train size x iteration x metric) observation;
    value None marks a recorded failure, not a crash."""

    dataset: str
    strategy: str
    train_size: int
    iteration: int
    metric: str
    value: float | None


# -- dataset context ---------------------------------------------------------


@dataclass(frozen=True)
class _Context:
    """Resolved inputs shared by all iterations of one experiment."""

    label: str
    pool: Table
    true_dag: CausalDag | None
    scm: Scm | None
    orderings: dict[str, list[str]] = field(default_factory=dict)


def _load_source(cfg: ExperimentConfig) -> _Context:
    src = cfg.source
    if isinstance(src, BuiltinSource):
        try:
            factory = BUILTIN_SCMS[src.name]
        except KeyError:
            raise DataError(f"unknown builtin SCM {src.name!r}") from None
        scm = factory(src.noise_std)
        pool = sample(scm, cfg.pool_size, derive_seed("pool", cfg.master_seed))
        return _Context(src.resolved_label(), pool, scm.dag, scm)
    schema = load_schema(src.schema_path)
    pool = load_table(src.data_path, schema)
    scm = load_scm(src.scm_path) if src.scm_path else None
    true_dag = None
    if src.graph_path:
        true_dag = require_dag(load_graph(src.graph_path))
    elif scm is not None:
        true_dag = scm.dag
    if true_dag is not None:
        if sorted(true_dag.nodes) != sorted(pool.names):
            raise GraphError("graph nodes do not match dataset columns")
        true_dag = CausalDag(tuple(pool.names), true_dag.edges)
    return _Context(src.resolved_label(), pool, true_dag, scm)


def _resolve_orderings(cfg: ExperimentConfig, ctx: _Context) -> dict[str, list[str]]:
    columns = list(ctx.pool.names)
    orderings = {"original": columns}
    if ctx.true_dag is not None:
        orderings["topological"] = topological_order(ctx.true_dag)
        orderings["reverse"] = reverse_topological_order(ctx.true_dag)
        if cfg.randomize_original_if_causal and columns in (
            orderings["topological"],
            orderings["reverse"],
        ):
            rng = rng_for("original-ordering", cfg.master_seed)
            orderings["original"] = [columns[i] for i in rng.permutation(len(columns))]
    return orderings


def _needs_graph(spec: StrategySpec) -> bool:
    return (
        spec.strategy == "dag"
        or (spec.strategy == "cpdag" and spec.graph_source == "minimal-cpdag")
        or (spec.strategy == "vanilla" and spec.ordering != "original")
    )


def _static_plan(spec: StrategySpec, ctx: _Context, orderings):
    """Plans that do not depend on the train draw; None for discovery."""
    if spec.strategy == "vanilla":
        return build_plan("vanilla", orderings[spec.ordering])
    if spec.strategy == "dag":
        return build_plan("dag", ctx.pool.names, ctx.true_dag)
    if spec.graph_source == "minimal-cpdag":
        return build_plan("cpdag", ctx.pool.names, minimal_cpdag(ctx.true_dag))
    return None


def _prepare(cfg: ExperimentConfig, mutilate: str | None = None) -> _Context:
    ctx = _load_source(cfg)
    if mutilate is not None and ctx.true_dag is not None:
        ctx = replace(
            ctx,
            true_dag=CausalDag(
                ctx.true_dag.nodes,
                [e for e in ctx.true_dag.edges if e[1] != mutilate],
            ),
        )
    orderings = _resolve_orderings(cfg, ctx)
    for spec in cfg.strategies:
        if _needs_graph(spec) and ctx.true_dag is None:
            raise DataError(f"strategy {spec.label!r} requires a true graph")
        if spec.ordering != "original" and ctx.true_dag is None:
            raise DataError(f"ordering {spec.ordering!r} requires a true graph")
    return replace(ctx, orderings=orderings)


# -- quality experiment ---------------------------------------------------------


def _harness_sampler(cfg: ExperimentConfig, threads: int):
    if cfg.sampler == "bridge":
        if cfg.bridge_command is None:
            raise DataError("bridge sampler needs a bridge_command")
        if threads > 1:
            raise DataError("bridge sampler runs single-threaded")
        return BridgeSampler(cfg.bridge_command)
    return make_sampler(cfg.sampler)


def run_quality_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[RunRecord]:
    """Resampled quality protocol; one record per strategy, train size,
    iteration and metric."""
    ctx = _prepare(cfg)
    sampler = _harness_sampler(cfg, threads)
    static_plans = {
        s.label: _static_plan(s, ctx, ctx.orderings) for s in cfg.strategies
    }

    def one_cell(args):
        train_size, iteration = args
        spec_split = SplitSpec(cfg.test_size, train_size, cfg.master_seed, iteration)
        train, test = fixed_split(ctx.pool, spec_split)
        records = []
        for strat in cfg.strategies:
            plan = static_plans[strat.label]
            try:
                if plan is None:  # discovered CPDAG, per train draw
                    discovered = pc_stable(train, cfg.discovery_alpha)
                    plan = build_plan("cpdag", ctx.pool.names, discovered)
                seed = derive_seed(
                    "gen", cfg.master_seed, strat.label, train_size, iteration
                )
                synth = generate(
                    GenerationRequest(train, plan, test.n, seed, cfg.permutations),
                    sampler,
                )
                report = evaluate_tables(
                    test, synth, list(cfg.spurious_pairs), cfg.metrics
                )
                values = dict(
                    zip(ALL_METRICS, (report.cmd, report.kmtvd, report.nnaa))
                )
                for metric in cfg.metrics:
                    records.append((strat.label, metric, values[metric]))
                for (a, b), rho in report.spurious:
                    records.append((strat.label, f"spurious:{a}:{b}", rho))
            except CausagenError:
                for metric in cfg.metrics:
                    records.append((strat.label, metric, None))
                for a, b in cfg.spurious_pairs:
                    records.append((strat.label, f"spurious:{a}:{b}", None))
        return train_size, iteration, records

    cells = [(n, i) for n in cfg.train_sizes for i in range(cfg.iterations)]
    return _collect(cfg, ctx.label, one_cell, cells, threads)


# -- treatment-effect experiment ---------------------------------------------------


def run_ate_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[RunRecord]:
    """Balanced-arm interventional protocol recording the absolute ATE
    error per strategy and iteration (metric name ``delta_ate``)."""
    if cfg.ate is None:
        raise DataError("ate experiment requires an AteSpec")
    ate = cfg.ate
    if cfg.test_size % 2 or any(n % 2 for n in cfg.train_sizes):
        raise DataError("ate experiment needs even test and train sizes")
    ctx = _prepare(cfg, mutilate=ate.treatment)
    if ctx.scm is None:
        raise DataError("ate experiment requires an SCM source")
    sampler = _harness_sampler(cfg, threads)
    static_plans = {
        s.label: _static_plan(s, ctx, ctx.orderings) for s in cfg.strategies
    }

    arm_pools = []
    for arm_index, value in enumerate((ate.x0, ate.x1)):
        arm_scm = intervene(ctx.scm, Intervention(ate.treatment, value))
        arm_pools.append(
            sample(
                arm_scm,
                cfg.pool_size // 2,
                derive_seed("arm-pool", cfg.master_seed, arm_index),
            )
        )

    treatment_is_numeric = ctx.pool.column_schema(ate.treatment).is_numeric
    assign = "nearest" if treatment_is_numeric else "exact"

    def split_arm(arm_index, train_size, iteration):
        return fixed_split(
            arm_pools[arm_index],
            SplitSpec(
                cfg.test_size // 2,
                train_size // 2,
                derive_seed("ate-arm", cfg.master_seed, arm_index),
                iteration,
            ),
        )

    def one_cell(args):
        train_size, iteration = args
        train0, test0 = split_arm(0, train_size, iteration)
        train1, test1 = split_arm(1, train_size, iteration)
        train = concat_tables([train0, train1])
        test = concat_tables([test0, test1])
        ate_test = ate_from_table(
            test, ate.treatment, ate.outcome, ate.x0, ate.x1, assign="exact"
        )
        records = []
        for strat in cfg.strategies:
            plan = static_plans[strat.label]
            try:
                if plan is None:
                    discovered = pc_stable(train, cfg.discovery_alpha)
                    plan = build_plan("cpdag", ctx.pool.names, discovered)
                seed = derive_seed(
                    "gen-ate", cfg.master_seed, strat.label, train_size, iteration
                )
                synth = generate(
                    GenerationRequest(train, plan, test.n, seed, cfg.permutations),
                    sampler,
                )
                ate_synth = ate_from_table(
                    synth, ate.treatment, ate.outcome, ate.x0, ate.x1, assign=assign
                )
                records.append(
                    (strat.label, "delta_ate", delta_ate(ate_test, ate_synth))
                )
            except CausagenError:
                records.append((strat.label, "delta_ate", None))
        return train_size, iteration, records

    cells = [(n, i) for n in cfg.train_sizes for i in range(cfg.iterations)]
    return _collect(cfg, ctx.label, one_cell, cells, threads)


def _collect(cfg, dataset_label, one_cell, cells, threads) -> list[RunRecord]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_cell, cells))
    else:
        results = [one_cell(c) for c in cells]
    strategy_rank = {s.label: k for k, s in enumerate(cfg.strategies)}
    records = []
    for train_size, iteration, cell_records in results:
        for label, metric, value in cell_records:
            records.append(
                RunRecord(dataset_label, label, train_size, iteration, metric, value)
            )
    records.sort(
        key=lambda r: (
            r.train_size,
            r.iteration,
            strategy_rank[r.strategy],
            r.metric,
        )
    )
    return records


# -- aggregation -------------------------------------------------------------------


def aggregate_and_compare(
    records: list[RunRecord],
    comparisons: list[tuple[str, str]],
    family: str = "figure",
    alpha: float = 0.05,
    ci_resamples: int = 10000,
) -> list[dict]:
    """Paired per-cell comparisons with Holm correction within families.

    Differences are side_a minus side_b per iteration; with lower-is-better
    metrics a positive Hodges-Lehmann estimate favors side_b. ``family``
    groups the Holm correction: "figure" (metric x pair), "dataset"
    (dataset x metric x pair), or "cell" (no grouping).
    """
    if family not in ("figure", "dataset", "cell"):
        raise DataError(f"unknown Holm family {family!r}")
    by_key: dict[tuple, dict[int, float | None]] = {}
    for r in records:
        by_key.setdefault(
            (r.dataset, r.train_size, r.metric, r.strategy), {}
        )[r.iteration] = r.value

    cells = []
    datasets = sorted({r.dataset for r in records})
    train_sizes = sorted({r.train_size for r in records})
    metrics = sorted({r.metric for r in records})
    for side_a, side_b in comparisons:
        for dataset in datasets:
            for metric in metrics:
                for train_size in train_sizes:
                    ka = (dataset, train_size, metric, side_a)
                    kb = (dataset, train_size, metric, side_b)
                    if ka not in by_key and kb not in by_key:
                        continue
                    if ka not in by_key or kb not in by_key:
                        raise DataError(
                            f"comparison {side_a!r} vs {side_b!r} has records "
                            f"for only one side in cell {(dataset, train_size, metric)}"
                        )
                    a_vals, b_vals = by_key[ka], by_key[kb]
                    if set(a_vals) != set(b_vals):
                        raise DataError(
                            f"unpaired iterations in cell {(dataset, train_size, metric)}"
                        )
                    diffs = [
                        a_vals[i] - b_vals[i]
                        for i in sorted(a_vals)
                        if a_vals[i] is not None and b_vals[i] is not None
                    ]
                    if not diffs:
                        raise DataError(
                            f"no defined pairs in cell {(dataset, train_size, metric)}"
                        )
                    cells.append(
                        {
                            "dataset": dataset,
                            "train_size": train_size,
                            "metric": metric,
                            "side_a": side_a,
                            "side_b": side_b,
                            "diffs": diffs,
                        }
                    )

    p_raw = [wilcoxon_pratt(c["diffs"]) for c in cells]
    families: dict[tuple, list[int]] = {}
    for idx, c in enumerate(cells):
        if family == "figure":
            key = (c["metric"], c["side_a"], c["side_b"])
        elif family == "dataset":
            key = (c["dataset"], c["metric"], c["side_a"], c["side_b"])
        else:
            key = (idx,)
        families.setdefault(key, []).append(idx)
    p_adj = [0.0] * len(cells)
    for members in families.values():
        adjusted = holm([p_raw[i] for i in members])
        for i, p in zip(members, adjusted):
            p_adj[i] = p

    out = []
    for idx, c in enumerate(cells):
        diffs = c.pop("diffs")
        ci_low, ci_high = hl_confidence_interval(
            diffs, alpha=alpha, resamples=ci_resamples
        )
        result = ComparisonResult(
            hl_estimate=hodges_lehmann(diffs),
            ci_low=ci_low,
            ci_high=ci_high,
            p_raw=p_raw[idx],
            p_adjusted=p_adj[idx],
            significant=bool(p_adj[idx] < alpha),
            n_pairs=len(diffs),
        )
        out.append(
            {
                **c,
                "hl_estimate": result.hl_estimate,
                "ci_low": result.ci_low,
                "ci_high": result.ci_high,
                "p_raw": result.p_raw,
                "p_adjusted": result.p_adjusted,
                "significant": result.significant,
                "n_pairs": result.n_pairs,
            }
        )
    return out


# -- order sensitivity ----------------------------------------------------------------


def check_sensitivity_config(cfg: ExperimentConfig) -> None:
    wanted = {("vanilla", o) for o in ORDERINGS}
    have = {(s.strategy, s.ordering) for s in cfg.strategies}
    if have != wanted:
        raise DataError(
            "sensitivity requires exactly the vanilla strategy under the "
            "original, topological and reverse orderings"
        )


def run_sensitivity(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    """Vanilla-only protocol over the three orderings: per-iteration metric
    range, summarized as a median with a bootstrap CI per cell."""
    check_sensitivity_config(cfg)
    records = run_quality_experiment(cfg, threads=threads)
    return sensitivity_from_records(records, cfg)


def sensitivity_from_records(
    records: list[RunRecord], cfg: ExperimentConfig
) -> list[dict]:
    by_cell: dict[tuple, dict[int, dict[str, float | None]]] = {}
    for r in records:
        by_cell.setdefault((r.train_size, r.metric), {}).setdefault(r.iteration, {})[
            r.strategy
        ] = r.value

    out = []
    for (train_size, metric), iterations in sorted(by_cell.items()):
        ranges = []
        for _, values in sorted(iterations.items()):
            triple = [values.get(f"vanilla-{o}") for o in ORDERINGS]
            if any(v is None for v in triple):
                continue
            ranges.append(max(triple) - min(triple))
        if not ranges:
            continue
        lo, hi = median_range_ci(
            ranges, seed=derive_seed("sens", cfg.master_seed, train_size, metric)
        )
        out.append(
            {
                "dataset": records[0].dataset,
                "train_size": train_size,
                "metric": metric,
                "median_range": float(np.median(ranges)),
                "ci_low": lo,
                "ci_high": hi,
                "n_iterations": len(ranges),
            }
        )
    return out


# -- records I/O -------------------------------------------------------------------------


RECORD_FIELDS = ("dataset", "strategy", "train_size", "iteration", "metric", "value")


def save_records(path, records: list[RunRecord]) -> None:
    from .table import _atomic_write

    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in records:
            value = "" if r.value is None else repr(r.value)
            writer.writerow(
                [r.dataset, r.strategy, r.train_size, r.iteration, r.metric, value]
            )

    _atomic_write(path, write)


def load_records(path) -> list[RunRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(RECORD_FIELDS):
            raise DataError(f"{path}: not a records file")
        for row in reader:
            records.append(
                RunRecord(
                    row["dataset"],
                    row["strategy"],
                    int(row["train_size"]),
                    int(row["iteration"]),
                    row["metric"],
                    None if row["value"] == "" else float(row["value"]),
                )
            )
    return records


def save_json(path, obj) -> None:
    from .table import atomic_write_text

    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


# -- experiment config files ---------------------------------------------------------


def config_from_obj(obj: dict) -> tuple[str, ExperimentConfig, dict]:
    """Parse an experiment config object.

    Returns (experiment kind, config, extras) where extras carries the
    comparison pairs and the Holm family for aggregation.
    """
    kind = obj.get("experiment", "quality")
    if kind not in ("quality", "ate", "sensitivity"):
        raise DataError(f"unknown experiment kind {kind!r}")
    src_obj = obj.get("dataset")
    if not isinstance(src_obj, dict) or "type" not in src_obj:
        raise DataError("config needs a dataset object with a 'type'")
    if src_obj["type"] == "builtin":
        source: BuiltinSource | ExternalSource = BuiltinSource(
            name=src_obj.get("name", "collider"),
            noise_std=float(src_obj.get("noise_std", 1e-5)),
            label=src_obj.get("label", ""),
        )
    elif src_obj["type"] == "external":
        source = ExternalSource(
            data_path=src_obj["data"],
            schema_path=src_obj["schema"],
            graph_path=src_obj.get("graph"),
            scm_path=src_obj.get("scm"),
            label=src_obj.get("label", "external"),
        )
    else:
        raise DataError(f"unknown dataset type {src_obj['type']!r}")

    strategies = tuple(
        StrategySpec(
            strategy=s["strategy"],
            ordering=s.get("ordering", "original"),
            graph_source=s.get("graph_source", "true-dag"),
        )
        for s in obj.get("strategies", ())
    )
    ate_obj = obj.get("ate")
    ate = (
        AteSpec(
            treatment=ate_obj["treatment"],
            outcome=ate_obj["outcome"],
            x0=ate_obj["x0"],
            x1=ate_obj["x1"],
        )
        if ate_obj
        else None
    )
    cfg = ExperimentConfig(
        source=source,
        strategies=strategies,
        train_sizes=tuple(int(n) for n in obj.get("train_sizes", ())),
        iterations=int(obj.get("iterations", 100)),
        test_size=int(obj.get("test_size", 2000)),
        sampler=obj.get("sampler", "cart"),
        master_seed=int(obj.get("master_seed", 0)),
        permutations=int(obj.get("permutations", 3)),
        metrics=tuple(obj.get("metrics", list(ALL_METRICS))),
        spurious_pairs=tuple(
            (a, b) for a, b in obj.get("spurious_pairs", ())
        ),
        pool_size=int(obj.get("pool_size", 6000)),
        discovery_alpha=float(obj.get("discovery_alpha", 0.05)),
        randomize_original_if_causal=bool(
            obj.get("randomize_original_if_causal", False)
        ),
        bridge_command=obj.get("bridge_command"),
        ate=ate,
    )
    if not cfg.train_sizes:
        raise DataError("config needs non-empty train_sizes")
    extras = {
        "comparisons": [tuple(pair) for pair in obj.get("comparisons", ())],
        "holm_family": obj.get("holm_family", "figure"),
    }
    return kind, cfg, extras
