"""Client for out-of-process conditional samplers.

The wire protocol is line-delimited JSON over the child's stdin/stdout,
one object per line, one request in flight at a time:

* ``{"op": "handshake", "protocol": 1}`` ->
  ``{"ok": true, "protocol": 1, "model": "<name/version>"}``
* ``{"op": "generate", "protocol": 1, "seed": s, "n_samples": n,
  "permutations": k, "schema": [{name, kind, categories}...],
  "train": [[row-major cells]...], "order": [names...],
  "conditioning": {name: [names...]}}`` ->
  ``{"ok": true, "rows": [[...]]}`` with rows in original schema column
  order; categorical cells travel as integer category indices.
* ``{"op": "shutdown"}`` -> ``{"ok": true}``, then the server exits 0.

Errors come back as ``{"ok": false, "error": "..."}`` and leave the server
alive. JSON numbers round-trip float64 exactly (repr encoding), so matrix
values survive the protocol bit-for-bit.
"""

from __future__ import annotations

import json
import shlex
import subprocess

import numpy as np

from .errors import DataError
from .table import Table

PROTOCOL_VERSION = 1


class BridgeError(DataError):
    """The bridge process failed or broke protocol."""


class BridgeSampler:
    """Drives one bridge process; usable as a context manager."""

    supports_categorical = True

    def __init__(self, command: str | list[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )
        self.model_info = self._handshake()

    def _roundtrip(self, obj: dict) -> dict:
        if self._proc.poll() is not None:
            raise BridgeError("bridge process is not running")
        self._proc.stdin.write(json.dumps(obj) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise BridgeError("bridge closed its output stream")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"bridge sent malformed JSON: {exc}") from exc
        if not isinstance(reply, dict):
            raise BridgeError(f"bridge sent a non-object reply: {reply!r}")
        if not reply.get("ok", False):
            raise BridgeError(f"bridge error: {reply.get('error', 'unknown')}")
        return reply

    def _handshake(self) -> str:
        reply = self._roundtrip({"op": "handshake", "protocol": PROTOCOL_VERSION})
        if reply.get("protocol") != PROTOCOL_VERSION:
            raise BridgeError(f"unsupported bridge protocol {reply.get('protocol')!r}")
        return str(reply.get("model", "unknown"))

    def generate_table(self, request) -> Table:
        train = request.train
        schema_obj = [
            {"name": c.name, "kind": c.kind, "categories": list(c.categories)}
            for c in train.schema
        ]
        matrix = [
            [
                train.columns()[j][i].item()
                for j in range(train.d)
            ]
            for i in range(train.n)
        ]
        reply = self._roundtrip(
            {
                "op": "generate",
                "protocol": PROTOCOL_VERSION,
                "seed": request.seed,
                "n_samples": request.n_samples,
                "permutations": request.permutations,
                "schema": schema_obj,
                "train": matrix,
                "order": list(request.plan.order),
                "conditioning": {
                    v: list(c) for v, c in request.plan.conditioning.items()
                },
            }
        )
        rows = reply.get("rows")
        if not isinstance(rows, list) or len(rows) != request.n_samples:
            raise BridgeError("bridge returned a malformed row matrix")
        columns = []
        for j, col_schema in enumerate(train.schema):
            dtype = np.float64 if col_schema.is_numeric else np.int64
            columns.append(np.asarray([row[j] for row in rows], dtype=dtype))
        return Table(list(train.schema), columns)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._roundtrip({"op": "shutdown"})
            except BridgeError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        if self._proc.stdin:
            self._proc.stdin.close()
        if self._proc.stdout:
            self._proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
