"""Protocol-level tests driving the server as a subprocess, exactly as a
host engine would."""

import json
import subprocess
import sys

import numpy as np
import pytest

SERVER = [sys.executable, "-m", "tabpfn_bridge", "--model", "mock"]


class Client:
    def __init__(self):
        self.proc = subprocess.Popen(
            SERVER, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )

    def send_line(self, line: str) -> dict:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        reply = self.proc.stdout.readline()
        assert reply, "server closed its output stream"
        return json.loads(reply)

    def send(self, obj: dict) -> dict:
        return self.send_line(json.dumps(obj))

    def close(self) -> int:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)
        return self.proc.returncode


@pytest.fixture
def client():
    c = Client()
    yield c
    c.close()


def handshake(client):
    reply = client.send({"op": "handshake", "protocol": 1})
    assert reply["ok"] and reply["protocol"] == 1
    return reply


def generate_request(train, n_samples=8, seed=3, schema=None, order=None):
    width = len(train[0])
    names = [f"c{j}" for j in range(width)]
    if schema is None:
        schema = [{"name": n, "kind": "numeric", "categories": []} for n in names]
    names = [c["name"] for c in schema]
    if order is None:
        order = list(names)
    conditioning = {v: [] for v in names}
    return {
        "op": "generate",
        "protocol": 1,
        "seed": seed,
        "n_samples": n_samples,
        "permutations": 3,
        "schema": schema,
        "train": train,
        "order": order,
        "conditioning": conditioning,
    }


def test_handshake_reports_model(client):
    reply = handshake(client)
    assert reply["model"].startswith("mock-bootstrap")


def test_generate_requires_handshake(client):
    reply = client.send(generate_request([[1.0, 2.0]]))
    assert not reply["ok"] and "handshake" in reply["error"]


def test_shutdown_clean_exit(client):
    handshake(client)
    reply = client.send({"op": "shutdown"})
    assert reply["ok"]
    assert client.close() == 0


def test_round_trip_preserves_float_precision(client):
    handshake(client)
    # awkward values that expose any non-repr float encoding
    train = [
        [0.1 + 0.2, 1e-308],
        [np.nextafter(1.0, 2.0), -1.2345678901234567e16],
        [float(np.float64(np.pi)), 2.0**-52],
    ]
    reply = client.send(generate_request(train, n_samples=64))
    assert reply["ok"]
    train_values = {(j, v) for row in train for j, v in enumerate(row)}
    for row in reply["rows"]:
        for j, v in enumerate(row):
            assert (j, v) in train_values  # bit-exact cell copies
    assert len(reply["rows"]) == 64


def test_generate_deterministic_per_seed(client):
    handshake(client)
    train = [[float(i), float(i * 2)] for i in range(10)]
    a = client.send(generate_request(train, seed=7))
    b = client.send(generate_request(train, seed=7))
    c = client.send(generate_request(train, seed=8))
    assert a["rows"] == b["rows"]
    assert a["rows"] != c["rows"]


def test_generate_validates_plan(client):
    handshake(client)
    req = generate_request([[1.0, 2.0]])
    req["order"] = ["c0"]  # not a permutation
    reply = client.send(req)
    assert not reply["ok"] and "permutation" in reply["error"]

    req = generate_request([[1.0, 2.0]])
    req["conditioning"] = {"c0": ["c1"], "c1": []}  # conditions on later var
    reply = client.send(req)
    assert not reply["ok"] and "before generation" in reply["error"]


def test_malformed_json_keeps_loop_alive(client):
    handshake(client)
    reply = client.send_line("{this is not json")
    assert not reply["ok"] and "malformed" in reply["error"]
    # server still works afterwards
    reply = client.send(generate_request([[1.0, 2.0]]))
    assert reply["ok"]


def test_unknown_op_and_wrong_protocol(client):
    reply = client.send({"op": "handshake", "protocol": 99})
    assert not reply["ok"]
    handshake(client)
    reply = client.send({"op": "frobnicate"})
    assert not reply["ok"] and "unknown op" in reply["error"]


def test_structurally_malformed_generate_is_an_error_object(client):
    handshake(client)
    req = generate_request([[1.0, 2.0]])
    req["schema"] = [1, 2]  # not schema objects
    reply = client.send(req)
    assert reply["ok"] is False and "malformed" in reply["error"]
    assert client.proc.poll() is None


def test_model_failure_returns_traceback(client):
    handshake(client)
    req = generate_request([[1.0, 2.0]])
    req["train"] = []  # empty -> model raises
    reply = client.send(req)
    assert not reply["ok"]
    assert "traceback" in reply


def test_client_forwards_permutations_on_the_wire(tmp_path):
    causagen = pytest.importorskip("causagen")
    from causagen.bridge_client import BridgeSampler
    from causagen import ColumnSchema, GenerationRequest, Table, build_plan

    # recording server: speaks the protocol, logs each request to a file
    log = tmp_path / "wire.jsonl"
    recorder = tmp_path / "recorder.py"
    recorder.write_text(
        "import json, sys\n"
        f"log = open({str(log)!r}, 'a')\n"
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    log.write(line); log.flush()\n"
        "    if req['op'] == 'handshake':\n"
        "        print(json.dumps({'ok': True, 'protocol': 1, 'model': 'rec'}))\n"
        "    elif req['op'] == 'generate':\n"
        "        rows = [[0.0] * len(req['schema'])] * req['n_samples']\n"
        "        print(json.dumps({'ok': True, 'rows': rows}))\n"
        "    else:\n"
        "        print(json.dumps({'ok': True}))\n"
        "        break\n"
        "    sys.stdout.flush()\n"
    )
    train = Table([ColumnSchema("x", "numeric")], [np.asarray([1.0, 2.0])])
    request = GenerationRequest(
        train, build_plan("vanilla", ["x"]), 4, seed=1, permutations=3
    )
    with BridgeSampler(f"{sys.executable} {recorder}") as sampler:
        sampler.generate_table(request)
    wire = [json.loads(l) for l in log.read_text().splitlines()]
    generate_ops = [r for r in wire if r["op"] == "generate"]
    assert generate_ops and generate_ops[0]["permutations"] == 3


def test_fuzz_corrupt_lines_no_crash(client):
    handshake(client)
    rng = np.random.default_rng(0)
    printable = np.array(list("{}[]\":,abcxyz0123456789 \\\t"))
    for _ in range(100):
        length = int(rng.integers(1, 60))
        garbage = "".join(rng.choice(printable, size=length))
        reply = client.send_line(garbage if garbage.strip() else "x")
        assert reply["ok"] is False
        assert client.proc.poll() is None  # still alive
    # lifecycle still clean after fuzzing
    assert client.send({"op": "shutdown"})["ok"]
    assert client.close() == 0
