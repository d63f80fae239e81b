"""Line-delimited JSON server over stdin/stdout.

One request object per input line, one response object per output line.
Anything that goes wrong with a single request (malformed JSON, protocol
violations, model failures) produces ``{"ok": false, "error": ...}`` and
the loop keeps serving; only ``shutdown`` (or EOF) ends the process, with
exit code 0.

Requests:
  {"op": "handshake", "protocol": 1}
  {"op": "generate", "protocol": 1, "seed": int, "n_samples": int,
   "permutations": int, "schema": [{"name", "kind", "categories"}...],
   "train": [[...]], "order": [names], "conditioning": {name: [names]}}
  {"op": "shutdown"}

Generate responses carry ``rows`` in original schema column order;
categorical cells travel as integer category indices. JSON floats are
emitted with repr precision, so float64 matrices round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from . import PROTOCOL_VERSION
from .mock import MockBootstrapModel

MODELS = {"mock": MockBootstrapModel}


def _load_model(name: str):
    if name == "tabpfn":
        from .tabpfn_model import TabPFNModel

        return TabPFNModel()
    try:
        return MODELS[name]()
    except KeyError:
        raise RuntimeError(f"unknown model {name!r}") from None


def _validate_generate(request: dict) -> str | None:
    if request.get("protocol") != PROTOCOL_VERSION:
        return f"unsupported protocol {request.get('protocol')!r}"
    for field in ("seed", "n_samples", "schema", "train", "order", "conditioning"):
        if field not in request:
            return f"missing field {field!r}"
    if not isinstance(request["n_samples"], int) or request["n_samples"] < 1:
        return "n_samples must be a positive integer"
    names = [c.get("name") for c in request["schema"]]
    if sorted(request["order"]) != sorted(names):
        return "order must be a permutation of the schema names"
    conditioning = request["conditioning"]
    if set(conditioning) != set(names):
        return "conditioning must cover exactly the schema names"
    seen: set[str] = set()
    for v in request["order"]:
        early = [c for c in conditioning[v] if c not in seen]
        if early:
            return f"conditioning of {v!r} references {early!r} before generation"
        seen.add(v)
    return None


def handle_line(line: str, model, state: dict) -> tuple[dict, bool]:
    """Returns (response, keep_running)."""
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"ok": False, "error": f"malformed JSON: {exc}"}, True
    if not isinstance(request, dict):
        return {"ok": False, "error": "request must be a JSON object"}, True

    op = request.get("op")
    if op == "handshake":
        if request.get("protocol") != PROTOCOL_VERSION:
            return {
                "ok": False,
                "error": f"unsupported protocol {request.get('protocol')!r}",
            }, True
        state["ready"] = True
        return {"ok": True, "protocol": PROTOCOL_VERSION, "model": model.name}, True
    if op == "generate":
        if not state.get("ready"):
            return {"ok": False, "error": "handshake required before generate"}, True
        try:
            problem = _validate_generate(request)
        except (TypeError, KeyError, AttributeError) as exc:
            problem = f"malformed generate request: {exc}"
        if problem is not None:
            return {"ok": False, "error": problem}, True
        try:
            rows = model.generate(request)
        except Exception as exc:
            return {
                "ok": False,
                "error": str(exc),
                "traceback": traceback.format_exc(),
            }, True
        return {"ok": True, "rows": rows}, True
    if op == "shutdown":
        return {"ok": True}, False
    return {"ok": False, "error": f"unknown op {op!r}"}, True


def serve(stdin=None, stdout=None, model_name: str = "mock") -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    try:
        model = _load_model(model_name)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    state: dict = {}
    for line in stdin:
        if not line.strip():
            continue
        response, keep_running = handle_line(line, model, state)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
        if not keep_running:
            return 0
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tabpfn-bridge",
        description="Serve a conditional table generator over stdio.",
    )
    parser.add_argument(
        "--model",
        default="mock",
        choices=["mock", "tabpfn"],
        help="mock = bootstrap echo model bundled for CI",
    )
    args = parser.parse_args(argv)
    return serve(model_name=args.model)


if __name__ == "__main__":
    sys.exit(main())
