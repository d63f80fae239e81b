"""Command-line entry point.

All machine-readable output goes to files (written atomically) or stdout;
human-oriented summaries go to stderr. Exit codes: 0 success, 1 usage
error, 2 data/validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .bridge_client import BridgeSampler
from .errors import CausagenError
from .generate import GenerationRequest, generate
from .graphs import (
    build_plan,
    load_graph,
    require_dag,
    reverse_topological_order,
    save_graph,
    topological_order,
)
from .discovery import CiDispatch, graph_quality, pc_stable
from .harness import (
    aggregate_and_compare,
    check_sensitivity_config,
    config_from_obj,
    load_records,
    run_ate_experiment,
    run_quality_experiment,
    save_json,
    save_records,
    sensitivity_from_records,
)
from .metrics import evaluate_tables
from .samplers import make_sampler
from .scm import (
    BUILTIN_SCMS,
    interventional_arms,
    load_scm,
    sample,
    save_scm,
)
from .table import load_schema, load_table, save_schema, save_table

log = logging.getLogger("causagen")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _parse_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for chunk in text.split(","):
        parts = chunk.split(":")
        if len(parts) != 2 or not all(parts):
            raise argparse.ArgumentTypeError(f"bad pair {chunk!r}, expected A:B")
        pairs.append((parts[0], parts[1]))
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causagen",
        description="Causally conditioned synthetic tabular data generation "
        "and evaluation.",
    )
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=["debug", "info", "warning", "error"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scm = sub.add_parser("scm", help="sample from structural causal models")
    scm_sub = scm.add_subparsers(dest="scm_command", required=True)

    scm_sample = scm_sub.add_parser("sample", help="draw observational data")
    _add_scm_source(scm_sample)
    scm_sample.add_argument("--n", type=_positive_int, required=True)
    scm_sample.add_argument("--seed", type=int, required=True)
    scm_sample.add_argument("--out", required=True)
    scm_sample.add_argument("--schema-out")
    scm_sample.add_argument("--scm-out")
    scm_sample.add_argument("--graph-out")

    scm_arms = scm_sub.add_parser("arms", help="draw balanced interventional arms")
    _add_scm_source(scm_arms)
    scm_arms.add_argument("--treatment", required=True)
    scm_arms.add_argument("--x0", type=float, required=True)
    scm_arms.add_argument("--x1", type=float, required=True)
    scm_arms.add_argument("--n-per-arm", type=_positive_int, required=True)
    scm_arms.add_argument("--seed", type=int, required=True)
    scm_arms.add_argument("--out", required=True)
    scm_arms.add_argument("--schema-out")

    gen = sub.add_parser("generate", help="generate synthetic data")
    gen.add_argument("--train", required=True)
    gen.add_argument("--schema", required=True)
    gen.add_argument("--strategy", required=True, choices=["vanilla", "dag", "cpdag"])
    gen.add_argument("--graph")
    gen.add_argument(
        "--order",
        default="original",
        choices=["original", "topological", "reverse"],
        help="column ordering (vanilla strategy only)",
    )
    gen.add_argument(
        "--sampler",
        default="cart",
        choices=["cart", "lingauss", "bootstrap", "bridge"],
    )
    gen.add_argument("--bridge-cmd")
    gen.add_argument("--n", type=_positive_int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--permutations", type=_positive_int, default=3)
    gen.add_argument("--out", required=True)

    disc = sub.add_parser("discover", help="PC-stable causal discovery")
    disc.add_argument("--data", required=True)
    disc.add_argument("--schema", required=True)
    disc.add_argument("--alpha", type=float, default=0.05)
    disc.add_argument("--max-cond", type=int, default=3)
    disc.add_argument("--bins", type=int, default=5)
    disc.add_argument("--out", required=True)

    quality = sub.add_parser("graph-quality", help="score a discovered graph")
    quality.add_argument("--estimated", required=True)
    quality.add_argument("--truth", required=True)
    quality.add_argument("--mutilate", help="drop true edges into this treatment")
    quality.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", help="compare synthetic against real data")
    ev.add_argument("--real", required=True)
    ev.add_argument("--synth", required=True)
    ev.add_argument("--schema", required=True)
    ev.add_argument("--spurious", type=_parse_pairs, default=[])
    ev.add_argument("--out", required=True)

    comp = sub.add_parser("compare", help="paired comparison of two record files")
    comp.add_argument("--metrics-a", required=True)
    comp.add_argument("--metrics-b", required=True)
    comp.add_argument("--family", default="figure", choices=["figure", "dataset", "cell"])
    comp.add_argument("--out", required=True)

    exp = sub.add_parser("experiment", help="run a full experiment config")
    exp.add_argument("--config", required=True)
    exp.add_argument("--out-dir", required=True)
    exp.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)

    bc = sub.add_parser("bridge-check", help="handshake with a bridge process")
    bc.add_argument("--bridge-cmd", required=True)

    return parser


def _add_scm_source(parser) -> None:
    parser.add_argument("--scm", help="SCM JSON file")
    parser.add_argument("--builtin", choices=sorted(BUILTIN_SCMS))
    parser.add_argument("--sigma", type=float, default=1e-5, help="builtin noise std")


def _resolve_scm(args):
    if bool(args.scm) == bool(args.builtin):
        raise CausagenError("give exactly one of --scm and --builtin")
    if args.scm:
        return load_scm(args.scm)
    return BUILTIN_SCMS[args.builtin](args.sigma)


# -- subcommand bodies ---------------------------------------------------------


def _cmd_scm(args) -> int:
    scm = _resolve_scm(args)
    if args.scm_command == "sample":
        table = sample(scm, args.n, args.seed)
        save_table(args.out, table)
        if args.schema_out:
            save_schema(args.schema_out, list(scm.schema))
        if args.scm_out:
            save_scm(args.scm_out, scm)
        if args.graph_out:
            save_graph(args.graph_out, scm.dag)
        log.info("wrote %d rows to %s", table.n, args.out)
    else:
        table = interventional_arms(
            scm, args.treatment, args.x0, args.x1, args.n_per_arm, args.seed
        )
        save_table(args.out, table)
        if args.schema_out:
            save_schema(args.schema_out, list(scm.schema))
        log.info("wrote %d arm rows to %s", table.n, args.out)
    return 0


def _cmd_generate(args) -> int:
    schema = load_schema(args.schema)
    train = load_table(args.train, schema)
    graph = load_graph(args.graph) if args.graph else None
    if args.order != "original" and args.strategy != "vanilla":
        raise CausagenError("--order applies to the vanilla strategy only")

    if args.strategy == "vanilla":
        columns = list(train.names)
        if args.order != "original":
            if graph is None:
                raise CausagenError(f"--order {args.order} needs --graph")
            dag = require_dag(graph)
            columns = (
                topological_order(dag)
                if args.order == "topological"
                else reverse_topological_order(dag)
            )
        plan = build_plan("vanilla", columns)
    elif args.strategy == "dag":
        if graph is None:
            raise CausagenError("dag strategy needs --graph")
        plan = build_plan("dag", train.names, require_dag(graph))
    else:
        if graph is None:
            raise CausagenError("cpdag strategy needs --graph")
        plan = build_plan("cpdag", train.names, graph)

    request = GenerationRequest(train, plan, args.n, args.seed, args.permutations)
    if args.sampler == "bridge":
        if not args.bridge_cmd:
            raise CausagenError("--sampler bridge needs --bridge-cmd")
        with BridgeSampler(args.bridge_cmd) as sampler:
            synth = generate(request, sampler)
    else:
        synth = generate(request, make_sampler(args.sampler))
    save_table(args.out, synth)
    log.info("generated %d rows with %s/%s", synth.n, args.strategy, args.sampler)
    return 0


def _cmd_discover(args) -> int:
    schema = load_schema(args.schema)
    data = load_table(args.data, schema)
    test = CiDispatch(data, args.alpha, args.bins)
    cpdag = pc_stable(data, args.alpha, test=test, max_cond=args.max_cond)
    save_graph(args.out, cpdag)
    log.info(
        "discovered %d directed and %d undirected edges",
        len(cpdag.directed),
        len(cpdag.undirected),
    )
    return 0


def _cmd_graph_quality(args) -> int:
    estimated = load_graph(args.estimated)
    truth = require_dag(load_graph(args.truth))
    quality = graph_quality(estimated, truth, args.mutilate)
    save_json(args.out, quality.as_dict())
    return 0


def _cmd_evaluate(args) -> int:
    schema = load_schema(args.schema)
    real = load_table(args.real, schema)
    synth = load_table(args.synth, schema)
    report = evaluate_tables(real, synth, args.spurious)
    save_json(args.out, report.as_dict())
    return 0


def _cmd_compare(args) -> int:
    records_a = load_records(args.metrics_a)
    records_b = load_records(args.metrics_b)
    sides = []
    for name, records in (("a", records_a), ("b", records_b)):
        labels = sorted({r.strategy for r in records})
        if len(labels) != 1:
            raise CausagenError(
                f"--metrics-{name} must hold exactly one strategy, found {labels!r}"
            )
        sides.append(labels[0])
    side_a, side_b = sides
    if side_a == side_b:
        side_b = f"{side_b}#b"
        records_b = [
            type(r)(r.dataset, side_b, r.train_size, r.iteration, r.metric, r.value)
            for r in records_b
        ]
    results = aggregate_and_compare(
        records_a + records_b, [(side_a, side_b)], family=args.family
    )
    save_json(args.out, results)
    log.info("wrote %d comparison cells", len(results))
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        kind, cfg, extras = config_from_obj(json.load(fh))
    os.makedirs(args.out_dir, exist_ok=True)
    if kind == "ate":
        records = run_ate_experiment(cfg, threads=args.threads)
    elif kind == "sensitivity":
        check_sensitivity_config(cfg)
        records = run_quality_experiment(cfg, threads=args.threads)
    else:
        records = run_quality_experiment(cfg, threads=args.threads)
    save_records(os.path.join(args.out_dir, "records.csv"), records)
    if kind == "sensitivity":
        summaries = sensitivity_from_records(records, cfg)
        save_json(os.path.join(args.out_dir, "sensitivity.json"), summaries)
    if extras["comparisons"]:
        results = aggregate_and_compare(
            records, extras["comparisons"], family=extras["holm_family"]
        )
        save_json(os.path.join(args.out_dir, "comparisons.json"), results)
    log.info("experiment %s: %d records", kind, len(records))
    return 0


def _cmd_bridge_check(args) -> int:
    from .table import ColumnSchema, Table
    import numpy as np

    with BridgeSampler(args.bridge_cmd) as sampler:
        print(f"bridge model: {sampler.model_info}", file=sys.stderr)
        schema = [ColumnSchema("x", "numeric")]
        train = Table(schema, [np.asarray([1.0, 2.0, 3.0])])
        plan = build_plan("vanilla", ["x"])
        out = generate(GenerationRequest(train, plan, 5, 0), sampler)
        if out.n != 5:
            raise CausagenError("bridge returned wrong row count")
    print("bridge ok", file=sys.stderr)
    return 0


_COMMANDS = {
    "scm": _cmd_scm,
    "generate": _cmd_generate,
    "discover": _cmd_discover,
    "graph-quality": _cmd_graph_quality,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "experiment": _cmd_experiment,
    "bridge-check": _cmd_bridge_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; our contract reserves 2 for
        # data errors and 1 for usage
        return 1 if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except CausagenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
