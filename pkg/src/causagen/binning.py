"""Quantile discretization shared by the pairwise-TVD metric and the
G²-based conditional independence testing of mixed variable pairs."""

from __future__ import annotations

import numpy as np


def quantile_edges(values: np.ndarray, bins: int) -> np.ndarray:
    """Interior quantile cut points (at most bins-1 after tie collapse)."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    qs = np.arange(1, bins) / bins
    return np.unique(np.quantile(values, qs))


def bin_values(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Right-closed bin index per value: bin i is (edges[i-1], edges[i]]."""
    return np.searchsorted(edges, values, side="left").astype(np.int64)
