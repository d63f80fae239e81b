"""Adapter for the real TabPFN unsupervised generator.

Imports lazily so the bridge starts without the heavy ML stack installed.
The wrapped extension generates whole tables autoregressively in the
column order of its input: the adapter reorders the training matrix to the
requested generation order, forwards ``permutations`` to the model's
conditioning-set averaging, and restores the original column order on the
way out. Per-variable conditioning sets narrower than the full prefix are
approximated by this ordering (the extension exposes no per-variable
conditioning mask); the fidelity gap is documented in the README.
Determinism holds only to the extent the wrapped model honors its seed.
"""

from __future__ import annotations

import numpy as np


class TabPFNModel:
    name = "tabpfn-unsupervised"

    def __init__(self):
        try:
            import torch
            from tabpfn import TabPFNClassifier, TabPFNRegressor
            from tabpfn_extensions.unsupervised import TabPFNUnsupervisedModel
        except ImportError as exc:
            raise RuntimeError(
                "tabpfn and tabpfn-extensions must be installed to use "
                f"--model tabpfn ({exc})"
            ) from exc
        self._torch = torch
        self._model = TabPFNUnsupervisedModel(
            tabpfn_clf=TabPFNClassifier(), tabpfn_reg=TabPFNRegressor()
        )
        version = getattr(__import__("tabpfn"), "__version__", "unknown")
        self.name = f"tabpfn-unsupervised/{version}"

    def generate(self, request: dict) -> list[list]:
        schema = request["schema"]
        names = [c["name"] for c in schema]
        order = request.get("order", names)
        positions = [names.index(v) for v in order]
        train = np.asarray(request["train"], dtype=np.float64)
        self._torch.manual_seed(int(request["seed"]))
        self._model.fit(self._torch.as_tensor(train[:, positions]))
        synthetic = self._model.generate_synthetic_data(
            n_samples=int(request["n_samples"]),
            t=1.0,
            n_permutations=int(request.get("permutations", 3)),
        )
        synthetic = np.asarray(synthetic, dtype=np.float64)
        out = np.empty_like(synthetic)
        out[:, positions] = synthetic
        rows = []
        for i in range(out.shape[0]):
            row = []
            for j, col in enumerate(schema):
                value = out[i, j]
                row.append(float(value) if col["kind"] == "numeric" else int(value))
            rows.append(row)
        return rows
