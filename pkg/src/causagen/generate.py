"""Autoregressive generation: execute a GenerationPlan with a sampler.

Targets are fitted and sampled in plan order; every generated cell owns an
RNG stream derived from (request seed, schema column index, row index), so
output is reproducible and independent of any parallel execution of the
row loop. The output table is always in the original schema column order,
whatever the generation order was.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, GraphError, SchemaError
from .graphs import GenerationPlan
from .seeding import CellRngFactory
from .table import Table


@dataclass(frozen=True)
class GenerationRequest:
    train: Table
    plan: GenerationPlan
    n_samples: int
    seed: int
    permutations: int = 3

    def __post_init__(self):
        if self.n_samples < 1:
            raise DataError("n_samples must be >= 1")
        if self.train.n < 1:
            raise DataError("training table is empty")
        if sorted(self.plan.order) != sorted(self.train.names):
            raise GraphError("plan variables do not match training schema")


def generate(request: GenerationRequest, sampler) -> Table:
    """Generate ``request.n_samples`` rows with ``sampler``.

    Samplers exposing ``generate_table`` (out-of-process bridges) receive
    the whole request; everything else is driven per target through
    ``fit``/``sample``.
    """
    if hasattr(sampler, "generate_table"):
        return sampler.generate_table(request)

    train = request.train
    n = request.n_samples
    cells = CellRngFactory()
    generated: dict[str, np.ndarray] = {}
    for target in request.plan.order:
        target_schema = train.column_schema(target)
        if not target_schema.is_numeric and not sampler.supports_categorical:
            raise SchemaError(
                f"sampler {type(sampler).__name__} cannot generate categorical "
                f"column {target!r}"
            )
        conditioning = request.plan.conditioning[target]
        missing = [c for c in conditioning if c not in generated]
        if missing:  # unreachable for validated plans
            raise GraphError(f"conditioning columns {missing!r} not yet generated")
        model = sampler.fit(
            train, target, conditioning, permutations=request.permutations
        )
        ctx_cols = [generated[c] for c in conditioning]
        col_index = train.column_index(target)
        dtype = np.float64 if target_schema.is_numeric else np.int64
        out = np.empty(n, dtype=dtype)
        for i in range(n):
            rng = cells.rng(request.seed, col_index, i)
            out[i] = model.sample(tuple(c[i] for c in ctx_cols), rng)
        generated[target] = out
    return Table(list(train.schema), [generated[name] for name in train.names])
