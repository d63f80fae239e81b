"""Conditional samplers: the pluggable engines behind autoregressive
generation.

A sampler fits one conditional (context columns -> target column) on the
training table and returns a model whose ``sample(ctx_row, rng)`` draws a
single value. The engine owns the RNG streams; each generated cell gets
its own derived Generator, so samplers must draw only from the ``rng``
they are handed.

Shared convention: with an empty conditioning set every built-in sampler
degenerates to a bootstrap of the training column (one uniform index draw
per cell). This is also the contract the out-of-process mock sampler
reproduces, which makes the bridge testable against the in-process
bootstrap, value for value.

``permutations`` is accepted by every ``fit`` for interface compatibility
with samplers that average over conditioning-set permutations. The
built-ins are order-invariant in their conditioning features, so they
ignore it; the bridge forwards it verbatim.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, SchemaError
from .table import CATEGORICAL, ColumnSchema, Table


def _context_arrays(train: Table, context) -> list[tuple[ColumnSchema, np.ndarray]]:
    return [(train.column_schema(c), train.column(c)) for c in context]


class _BootstrapModel:
    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        self.values = values

    def sample(self, ctx_row, rng):
        return self.values[rng.integers(len(self.values))]


class BootstrapSampler:
    """Marginal bootstrap; ignores the conditioning set entirely."""

    supports_categorical = True

    def fit(self, train: Table, target: str, context, permutations: int = 3):
        return _BootstrapModel(train.column(target))


# -- linear-Gaussian -------------------------------------------------------


class _LinearModel:
    __slots__ = ("schemas", "beta", "target_values", "residuals", "empty")

    def __init__(self, schemas, beta, target_values, residuals):
        self.schemas = schemas
        self.beta = beta
        self.target_values = target_values
        self.residuals = residuals
        self.empty = not schemas

    def _features(self, ctx_row) -> np.ndarray:
        feats = [1.0]
        for schema, value in zip(self.schemas, ctx_row):
            if schema.is_numeric:
                feats.append(float(value))
            else:
                onehot = [0.0] * len(schema.categories)
                onehot[int(value)] = 1.0
                feats.extend(onehot)
        return np.asarray(feats)

    def sample(self, ctx_row, rng):
        if self.empty:
            return self.target_values[rng.integers(len(self.target_values))]
        prediction = float(self._features(ctx_row) @ self.beta)
        return prediction + self.residuals[rng.integers(len(self.residuals))]


class LinearGaussianSampler:
    """Least-squares fit with an empirical residual bootstrap.

    Categorical context features are one-hot encoded; a rank-deficient
    design falls back to a ridge-stabilized normal-equation solve
    (lambda = 1e-8, scaled by the mean diagonal of X'X).
    """

    supports_categorical = False

    def fit(self, train: Table, target: str, context, permutations: int = 3):
        if train.column_schema(target).kind == CATEGORICAL:
            raise SchemaError("linear-Gaussian sampler requires a numeric target")
        y = train.column(target)
        ctx = _context_arrays(train, context)
        if not ctx:
            return _LinearModel([], None, y, None)

        blocks = [np.ones((train.n, 1))]
        for schema, col in ctx:
            if schema.is_numeric:
                blocks.append(col[:, None])
            else:
                onehot = np.zeros((train.n, len(schema.categories)))
                onehot[np.arange(train.n), col] = 1.0
                blocks.append(onehot)
        design = np.hstack(blocks)

        beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < design.shape[1]:
            gram = design.T @ design
            lam = 1e-8 * np.trace(gram) / gram.shape[0]
            beta = np.linalg.solve(gram + lam * np.eye(gram.shape[0]), design.T @ y)
        residuals = y - design @ beta
        return _LinearModel([s for s, _ in ctx], beta, y, residuals)


# -- CART --------------------------------------------------------------------


class _TreeNode:
    __slots__ = ("feature", "kind", "cut", "left", "right", "values")

    def __init__(self):
        self.feature = None  # None means leaf
        self.kind = None  # "num" (x <= cut goes left) or "cat" (x == cut)
        self.cut = None
        self.left = None
        self.right = None
        self.values = None  # leaf payload: training target values, train order


def _sse(total: float, total_sq: float, count: int) -> float:
    return total_sq - total * total / count


def _gini_counts(counts: np.ndarray, n: int) -> float:
    return n * (1.0 - float((counts / n) @ (counts / n)))


class _CartModel:
    __slots__ = ("root", "positions")

    def __init__(self, root: _TreeNode, context_names):
        self.root = root
        self.positions = {name: i for i, name in enumerate(context_names)}

    def sample(self, ctx_row, rng):
        node = self.root
        while node.feature is not None:
            value = ctx_row[self.positions[node.feature]]
            if node.kind == "num":
                go_left = float(value) <= node.cut
            else:
                go_left = int(value) == node.cut
            node = node.left if go_left else node.right
        return node.values[rng.integers(len(node.values))]


class CartSampler:
    """Greedy regression/classification tree with leaf-bootstrap sampling.

    Numeric targets use variance-reduction splits, categorical targets use
    Gini. Features are scanned in sorted-name order, so the fitted tree
    does not depend on the order of the conditioning columns.
    """

    supports_categorical = True

    def __init__(self, max_depth: int = 12, min_leaf: int = 5):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, train: Table, target: str, context, permutations: int = 3):
        y_schema = train.column_schema(target)
        y = train.column(target)
        features = {c: (train.column_schema(c), train.column(c)) for c in context}
        order = sorted(features)
        root = self._grow(
            np.arange(train.n), y, y_schema, features, order, depth=0
        )
        return _CartModel(root, list(context))

    # impurity of a subset: SSE for numeric targets, size-weighted Gini
    # for categorical ones; split gain is the parent-minus-children drop.

    def _impurity(self, y_sub, y_schema):
        n = len(y_sub)
        if y_schema.is_numeric:
            return _sse(float(y_sub.sum()), float((y_sub * y_sub).sum()), n)
        counts = np.bincount(y_sub, minlength=len(y_schema.categories)).astype(float)
        return _gini_counts(counts, n)

    def _grow(self, idx, y, y_schema, features, order, depth):
        node = _TreeNode()
        y_sub = y[idx]
        n = len(idx)
        if depth >= self.max_depth or n < 2 * self.min_leaf:
            node.values = y_sub
            return node
        parent_impurity = self._impurity(y_sub, y_schema)
        if parent_impurity <= 0.0:
            node.values = y_sub
            return node

        best = None  # (gain, feature, kind, cut, left_mask)
        for name in order:
            f_schema, col = features[name]
            x = col[idx]
            if f_schema.is_numeric:
                cand = self._best_numeric_split(x, y_sub, y_schema)
            else:
                cand = self._best_categorical_split(x, y_sub, y_schema, f_schema)
            if cand is None:
                continue
            gain, kind, cut, left_mask = cand
            if best is None or gain > best[0]:
                best = (gain, name, kind, cut, left_mask)

        if best is None or best[0] <= parent_impurity * 1e-12:
            node.values = y_sub
            return node

        _, name, kind, cut, left_mask = best
        node.feature = name
        node.kind = kind
        node.cut = cut
        node.left = self._grow(idx[left_mask], y, y_schema, features, order, depth + 1)
        node.right = self._grow(idx[~left_mask], y, y_schema, features, order, depth + 1)
        return node

    def _best_numeric_split(self, x, y_sub, y_schema):
        n = len(x)
        sort = np.argsort(x, kind="stable")
        xs, ys = x[sort], y_sub[sort]
        # valid split points: between distinct consecutive x values with
        # at least min_leaf rows on each side
        splittable = np.nonzero(xs[:-1] < xs[1:])[0] + 1  # left sizes
        splittable = splittable[
            (splittable >= self.min_leaf) & (n - splittable >= self.min_leaf)
        ]
        if len(splittable) == 0:
            return None

        if y_schema.is_numeric:
            csum = np.cumsum(ys)
            csum_sq = np.cumsum(ys * ys)
            total, total_sq = csum[-1], csum_sq[-1]
            parent = _sse(float(total), float(total_sq), n)
            left = csum[splittable - 1]
            left_sq = csum_sq[splittable - 1]
            k = splittable.astype(float)
            child = (
                (left_sq - left * left / k)
                + ((total_sq - left_sq) - (total - left) ** 2 / (n - k))
            )
            gains = parent - child
        else:
            k_cat = len(y_schema.categories)
            onehot = np.zeros((n, k_cat))
            onehot[np.arange(n), ys] = 1.0
            ccounts = np.cumsum(onehot, axis=0)
            totals = ccounts[-1]
            parent = _gini_counts(totals, n)
            lc = ccounts[splittable - 1]
            rc = totals[None, :] - lc
            k = splittable.astype(float)[:, None]
            gini_l = k[:, 0] - (lc * lc / k).sum(axis=1)
            gini_r = (n - k[:, 0]) - (rc * rc / (n - k)).sum(axis=1)
            gains = parent - (gini_l + gini_r)

        pos = int(np.argmax(gains))
        size = int(splittable[pos])
        threshold = 0.5 * (xs[size - 1] + xs[size])
        left_mask = x <= threshold
        # midpoint rounding can land on a sample; recheck leaf sizes
        if left_mask.sum() < self.min_leaf or (~left_mask).sum() < self.min_leaf:
            return None
        return float(gains[pos]), "num", float(threshold), left_mask

    def _best_categorical_split(self, x, y_sub, y_schema, f_schema):
        n = len(x)
        parent = self._impurity(y_sub, y_schema)
        best = None
        for cat in range(len(f_schema.categories)):
            left_mask = x == cat
            n_left = int(left_mask.sum())
            if n_left < self.min_leaf or n - n_left < self.min_leaf:
                continue
            gain = parent - (
                self._impurity(y_sub[left_mask], y_schema)
                + self._impurity(y_sub[~left_mask], y_schema)
            )
            if best is None or gain > best[0]:
                best = (float(gain), "cat", cat, left_mask)
        return best


SAMPLERS = {
    "bootstrap": BootstrapSampler,
    "lingauss": LinearGaussianSampler,
    "cart": CartSampler,
}


def make_sampler(name: str, **kwargs):
    try:
        factory = SAMPLERS[name]
    except KeyError:
        raise DataError(f"unknown sampler {name!r}") from None
    return factory(**kwargs)
