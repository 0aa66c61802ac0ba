"""Space-time memory read and prior enhancement over feature grids.

memory_read matches every query location against all memory locations,
normalizes the similarities into row-stochastic weights, retrieves memory
values by weighted summation, and concatenates them to the query values.
prior_enhance gates the query feature with a map derived from the previous
frame's mask before the read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .core import FeatureGrid, ObjectMask, block_mean
from .errors import DimensionError, EmptyMemoryError
from .membank import StackedGrid

PRIOR_MODES = ("off", "weak", "strong")


@dataclass(frozen=True)
class ReadOutput:
    """Result of one memory read.

    combined carries the query value channels followed by the retrieved
    memory value channels, per query location; weights is the (query
    locations x memory locations) row-stochastic matching matrix.
    """

    combined: FeatureGrid
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def memory_read(query_key: FeatureGrid, query_value: FeatureGrid,
                memory_key: StackedGrid, memory_value: StackedGrid,
                mode: str = "softmax", *, scale: float = 1.0,
                l2_normalize: bool = False,
                channel_scale: bool = False) -> ReadOutput:
    """Retrieve memory values for every query location.

    scale multiplies the similarities before normalization (sharpness knob,
    default 1 for the plain dot product); channel_scale additionally divides
    by sqrt(C); l2_normalize unit-normalizes key rows first. All three
    default to the unmodified dot-product read.
    """
    if query_key.channels != memory_key.channels:
        raise DimensionError(
            f"key channel mismatch: query {query_key.channels} vs "
            f"memory {memory_key.channels}")
    if (query_key.height, query_key.width) != (query_value.height,
                                               query_value.width):
        raise DimensionError("query key and value must share grid resolution")
    if memory_key.locations != memory_value.locations:
        raise DimensionError(
            f"memory key has {memory_key.locations} locations but value has "
            f"{memory_value.locations}")
    if memory_key.locations == 0:
        raise EmptyMemoryError("memory holds no locations")

    qk = query_key.location_matrix()
    mk = memory_key.location_matrix()
    if l2_normalize:
        qk = _unit_rows(qk)
        mk = _unit_rows(mk)
    eff_scale = float(scale)
    if channel_scale:
        eff_scale /= math.sqrt(query_key.channels)

    weights, retrieved = kernels.read(qk, mk, memory_value.location_matrix(),
                                      eff_scale, mode)
    combined = np.concatenate([query_value.location_matrix(), retrieved],
                              axis=1)
    grid = FeatureGrid(query_key.height, query_key.width,
                       query_value.channels + memory_value.channels, combined)
    return ReadOutput(combined=grid, weights=weights)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.maximum(norms, 1e-12)


def downsample_mask(mask: ObjectMask, target_height: int,
                    target_width: int) -> ObjectMask:
    """Area (block-mean) downsample; identity when the target matches."""
    if (target_height, target_width) == mask.resolution():
        return mask
    reduced = block_mean(mask.values, target_height, target_width)
    return ObjectMask(target_height, target_width, reduced)


@dataclass(frozen=True)
class PriorGate:
    """Seeded stand-in for the learned mask-conditioned gating layer.

    A fixed affine map over (C feature channels + 1 mask channel) followed
    by a sigmoid produces a single gate per location, broadcast over all
    channels. Parameters are a pure function of the seed.
    """

    mode: str
    weights: np.ndarray | None = None
    bias: float = 0.0
    beta: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in PRIOR_MODES:
            raise ValueError(f"mode must be one of {PRIOR_MODES}")
        if self.mode != "off":
            if self.weights is None:
                raise ValueError(f"{self.mode} mode needs affine weights")
            w = np.ascontiguousarray(self.weights, dtype=np.float64)
            if w.ndim != 1:
                raise DimensionError("gate weights must be a flat vector")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_seed(cls, mode: str, channels: int, seed: int,
                  beta: float = 5.0) -> "PriorGate":
        if mode == "off":
            return cls(mode="off", seed=seed, beta=beta)
        rng = np.random.default_rng(seed)
        weights = rng.normal(0.0, 1.0 / math.sqrt(channels + 1), channels + 1)
        bias = float(rng.normal(0.0, 0.5))
        return cls(mode=mode, weights=weights, bias=bias, beta=beta, seed=seed)


def prior_enhance(query_feature: FeatureGrid, previous_mask: ObjectMask,
                  gate: PriorGate) -> FeatureGrid:
    """Gate the query feature with the previous frame's (downsampled) mask.

    weak: g = sigmoid(affine(features, mask)); output = g * features.
    strong: the features are first shifted by beta * mask * mean-feature
    direction (an amplified, additive prior) and then gated.
    off: identity.
    """
    if gate.mode == "off":
        return query_feature
    if gate.weights.shape[0] != query_feature.channels + 1:
        raise DimensionError(
            f"gate expects {gate.weights.shape[0] - 1} feature channels, "
            f"grid has {query_feature.channels}")
    down = downsample_mask(previous_mask, query_feature.height,
                           query_feature.width)
    m = down.values.reshape(-1)
    feats = query_feature.location_matrix()
    if gate.mode == "strong":
        mu = feats.mean(axis=0)
        norm = float(np.linalg.norm(mu))
        if norm > 1e-12:
            feats = feats + gate.beta * m[:, None] * (mu / norm)[None, :]
    z = feats @ gate.weights[:-1] + m * gate.weights[-1] + gate.bias
    g = expit(z)
    return FeatureGrid(query_feature.height, query_feature.width,
                       query_feature.channels, g[:, None] * feats)
