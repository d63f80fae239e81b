"""Mock generator: per-cell bootstrap of the training columns.

This reproduces the host engine's built-in bootstrap sampler value for
value. The contract (documented on the engine side as well): each
generated cell (seed, column j, row i) owns a numpy PCG64 stream whose
128-bit state is blake2b-128 over type-tagged tokens
("cell", seed, j, i) — tag "s:"/"i:" plus str(token) plus 0x1f — with
stream increment CELL_STREAM_INC and an empty 32-bit buffer. The mock
draws one uniform index into the training rows from that stream and emits
the training cell, ignoring the conditioning sets.
"""

from __future__ import annotations

import hashlib

import numpy as np

CELL_STREAM_INC = 0x5851F42D4C957F2D14057B7EF767814F
_SEP = b"\x1f"


def _cell_state(seed: int, column_index: int, row_index: int) -> int:
    h = hashlib.blake2b(digest_size=16)
    for tok in ("cell", seed, column_index, row_index):
        tag = b"i:" if isinstance(tok, int) else b"s:"
        h.update(tag + str(tok).encode("utf-8") + _SEP)
    return int.from_bytes(h.digest(), "little")


class MockBootstrapModel:
    """Echo model for CI: resamples training cells, deterministic per seed."""

    name = "mock-bootstrap/1.0"

    def __init__(self):
        self._bit_generator = np.random.PCG64(0)
        self._generator = np.random.Generator(self._bit_generator)
        self._template = self._bit_generator.state

    def _rng(self, seed: int, column_index: int, row_index: int):
        state = dict(self._template)
        state["state"] = {
            "state": _cell_state(seed, column_index, row_index),
            "inc": CELL_STREAM_INC,
        }
        self._bit_generator.state = state
        return self._generator

    def generate(self, request: dict) -> list[list]:
        schema = request["schema"]
        train = request["train"]
        n_samples = int(request["n_samples"])
        seed = int(request["seed"])
        n_train = len(train)
        if n_train == 0:
            raise ValueError("empty training matrix")
        width = len(schema)
        if any(len(row) != width for row in train):
            raise ValueError("ragged training matrix")
        rows = []
        for i in range(n_samples):
            row = []
            for j in range(width):
                rng = self._rng(seed, j, i)
                row.append(train[rng.integers(n_train)][j])
            rows.append(row)
        return rows
