"""Independent brute-force references for the fast paths.

These deliberately use a different algorithmic route than the production
code (set enumeration, explicit per-pixel matching, pure-python loops) so
equivalence checks are meaningful. Used by the test suite and the
`check-metrics` command.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ObjectMask
from .metrics import default_tolerance


def iou_reference(prediction: ObjectMask, truth: ObjectMask) -> float:
    """Set-enumeration IoU (binarized at 0.5); empty vs empty is 1.0."""
    pred = {(r, c) for r, c in zip(*np.nonzero(prediction.values >= 0.5))}
    true = {(r, c) for r, c in zip(*np.nonzero(truth.values >= 0.5))}
    union = pred | true
    if not union:
        return 1.0
    return len(pred & true) / len(union)


def boundary_points_reference(mask: ObjectMask) -> list[tuple[int, int]]:
    """Boundary pixels by explicit 4-neighbor inspection (frame border
    counts as background)."""
    fg = mask.values >= 0.5
    h, w = fg.shape
    points = []
    for r in range(h):
        for c in range(w):
            if not fg[r, c]:
                continue
            if (r == 0 or not fg[r - 1, c] or r == h - 1 or not fg[r + 1, c]
                    or c == 0 or not fg[r, c - 1] or c == w - 1
                    or not fg[r, c + 1]):
                points.append((r, c))
    return points


def boundary_f_reference(prediction: ObjectMask, truth: ObjectMask,
                         tolerance_px: int | None = None) -> float:
    """Exhaustive distance-threshold boundary matching (no dilation)."""
    if tolerance_px is None:
        tolerance_px = default_tolerance(*truth.resolution())
    pb = boundary_points_reference(prediction)
    tb = boundary_points_reference(truth)
    if not pb and not tb:
        return 1.0
    if not pb or not tb:
        return 0.0
    tol_sq = tolerance_px * tolerance_px

    def matched(points, targets):
        hits = 0
        for r, c in points:
            for rr, cc in targets:
                if (r - rr) ** 2 + (c - cc) ** 2 <= tol_sq:
                    hits += 1
                    break
        return hits

    precision = matched(pb, tb) / len(pb)
    recall = matched(tb, pb) / len(tb)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def memory_read_reference(query_keys, memory_keys, memory_values,
                          scale: float = 1.0, mode: str = "softmax"):
    """Triple-loop weighted-summation read over plain python floats.

    raw_sum normalizes by the plain sum of dot products (the literal
    weighted-summation formula); softmax applies the max-shifted
    exponential. Returns (weights, retrieved) as float64 arrays.
    """
    qk = [list(map(float, row)) for row in np.asarray(query_keys)]
    mk = [list(map(float, row)) for row in np.asarray(memory_keys)]
    mv = [list(map(float, row)) for row in np.asarray(memory_values)]
    lq, lm, cv = len(qk), len(mk), len(mv[0])
    weights = [[0.0] * lm for _ in range(lq)]
    retrieved = [[0.0] * cv for _ in range(lq)]
    for i in range(lq):
        sims = []
        for j in range(lm):
            dot = 0.0
            for a, b in zip(qk[i], mk[j]):
                dot += a * b
            sims.append(dot * scale)
        if mode == "softmax":
            top = max(sims)
            exps = [math.exp(s - top) for s in sims]
            z = sum(exps)
            row = [e / z for e in exps]
        elif mode == "raw_sum":
            z = sum(sims)
            if z <= 0.0:
                raise ArithmeticError(f"row {i} sum {z} not strictly positive")
            row = [s / z for s in sims]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        weights[i] = row
        for k in range(cv):
            acc = 0.0
            for j in range(lm):
                acc += row[j] * mv[j][k]
            retrieved[i][k] = acc
    return np.array(weights), np.array(retrieved)


def exp_reference(x: float, terms: int = 60) -> float:
    """Taylor-series exponential, independent of libm.

    Computes e^x for |x| reasonably small (series on the reduced value keeps
    it exact to well below 1e-12 for the ranges used here).
    """
    # e^x = (e^(x/2^k))^(2^k) with the series evaluated near zero
    k = 0
    reduced = x
    while abs(reduced) > 0.5:
        reduced /= 2.0
        k += 1
    total = 0.0
    term = 1.0
    for n in range(1, terms):
        total += term
        term *= reduced / n
        if abs(term) < 1e-30:
            break
    total += term
    for _ in range(k):
        total *= total
    return total
