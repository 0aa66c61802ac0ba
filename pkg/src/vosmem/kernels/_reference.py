"""Numpy implementation of the dense read kernels (the fallback backend).

All functions take C-contiguous float64 arrays of shape (locations, channels)
or (query locations, memory locations) and never mutate their inputs.
"""

import numpy as np

from ..errors import DegenerateRowError


def similarity(query_keys, memory_keys, scale=1.0):
    """Dense dot-product similarity: out[i, j] = scale * <q_i, m_j>."""
    sim = query_keys @ memory_keys.T
    if scale != 1.0:
        sim *= scale
    return sim


def normalize_rows(sim, mode):
    """Normalize each row to sum 1, via max-shifted softmax or a plain sum."""
    if mode == "softmax":
        out = sim - sim.max(axis=1, keepdims=True)
        np.exp(out, out=out)
        out /= out.sum(axis=1, keepdims=True)
        return out
    if mode == "raw_sum":
        sums = sim.sum(axis=1)
        bad = np.flatnonzero(sums <= 0.0)
        if bad.size:
            raise DegenerateRowError(
                f"row {bad[0]} sums to {sums[bad[0]]:g}; raw_sum needs "
                "strictly positive row sums")
        return sim / sums[:, None]
    raise ValueError(f"unknown normalization mode {mode!r}")


def read(query_keys, memory_keys, memory_values, scale=1.0, mode="softmax"):
    """Similarity, row normalization and value retrieval in one call.

    Returns (weights, retrieved) with shapes (Lq, Lm) and (Lq, Cv).
    """
    weights = normalize_rows(similarity(query_keys, memory_keys, scale), mode)
    return weights, weights @ memory_values
