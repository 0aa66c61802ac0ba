"""Dense grid containers and the numeric primitives everything else uses.

Conventions fixed here once for the whole package:

- grids flatten row-major (row index varies slowest): location = r * W + c;
- all payloads are float64 and finite; containers are immutable after
  construction and safe to share across threads;
- weight matrices are row-stochastic (each row sums to 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, OverlapError, ResolutionError


def _readonly_f64(array, what: str) -> np.ndarray:
    out = np.ascontiguousarray(array, dtype=np.float64)
    if not np.isfinite(out).all():
        raise ValueError(f"{what} contains non-finite values")
    out.setflags(write=False)
    return out


def block_mean(array: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area (block-mean) downsample of the two leading axes."""
    h, w = array.shape[:2]
    if out_h < 1 or out_w < 1 or h % out_h or w % out_w:
        raise ResolutionError(
            f"target {out_h}x{out_w} does not divide source {h}x{w}")
    fy, fx = h // out_h, w // out_w
    shaped = array.reshape(out_h, fy, out_w, fx, *array.shape[2:])
    return shaped.mean(axis=(1, 3))


def upsample_nearest(array: np.ndarray, fy: int, fx: int) -> np.ndarray:
    """Nearest-neighbor upsample of the two leading axes by integer factors."""
    return np.repeat(np.repeat(array, fy, axis=0), fx, axis=1)


@dataclass(frozen=True)
class FeatureGrid:
    """Dense H'xW'xC grid of reals, stored as (H'*W', C) row-major.

    Holds encoder outputs and the key/value maps the read path matches
    against. Immutable: `data` is a read-only float64 array.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            if getattr(self, name) < 1:
                raise DimensionError(f"{name} must be a positive integer")
        data = _readonly_f64(self.data, "FeatureGrid data")
        expected = (self.height * self.width, self.channels)
        if data.size != expected[0] * expected[1]:
            raise DimensionError(
                f"data length {data.size} != H*W*C = {expected[0] * expected[1]}")
        if data.shape != expected:
            data = data.reshape(expected)
            data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> "FeatureGrid":
        """Build from an (H, W, C) array."""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionError(f"expected (H, W, C), got shape {arr.shape}")
        h, w, c = arr.shape
        return cls(h, w, c, arr.reshape(h * w, c))

    @property
    def locations(self) -> int:
        return self.height * self.width

    def location_matrix(self) -> np.ndarray:
        """(locations, channels) view, row-major over (row, col)."""
        return self.data

    def as_hwc(self) -> np.ndarray:
        return self.data.reshape(self.height, self.width, self.channels)


@dataclass(frozen=True)
class ObjectMask:
    """Per-object segmentation mask at frame resolution, values in [0, 1].

    1 means object, 0 background; intermediate values are soft probabilities.
    Binarization happens at 0.5 (>= 0.5 counts as foreground), which is
    idempotent.
    """

    height: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DimensionError("mask resolution must be positive")
        values = _readonly_f64(self.values, "ObjectMask values")
        if values.shape != (self.height, self.width):
            if values.size != self.height * self.width:
                raise DimensionError(
                    f"values length {values.size} != H*W = "
                    f"{self.height * self.width}")
            values = values.reshape(self.height, self.width)
            values.setflags(write=False)
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, array) -> "ObjectMask":
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"expected (H, W), got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], arr)

    @classmethod
    def empty(cls, height: int, width: int) -> "ObjectMask":
        return cls(height, width, np.zeros((height, width)))

    def binary(self) -> np.ndarray:
        return self.values >= 0.5

    def is_empty(self) -> bool:
        return not self.binary().any()

    def resolution(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class LabeledMaskSet:
    """Ordered per-object masks for one frame; background is implied.

    All masks share one resolution, and their binarized footprints must be
    pairwise disjoint (each pixel belongs to at most one object).
    """

    masks: tuple[ObjectMask, ...]

    def __post_init__(self):
        masks = tuple(self.masks)
        if not masks:
            raise DimensionError("a LabeledMaskSet needs at least one object")
        res = masks[0].resolution()
        for i, m in enumerate(masks):
            if m.resolution() != res:
                raise DimensionError(
                    f"mask {i} resolution {m.resolution()} != {res}")
        if len(masks) > 1:
            claimed = np.zeros(res, dtype=np.int32)
            for m in masks:
                claimed += m.binary()
            if claimed.max() > 1:
                raise OverlapError("object masks overlap after binarization")
        object.__setattr__(self, "masks", masks)

    @property
    def object_count(self) -> int:
        return len(self.masks)

    @property
    def height(self) -> int:
        return self.masks[0].height

    @property
    def width(self) -> int:
        return self.masks[0].width

    def resolution(self) -> tuple[int, int]:
        return self.masks[0].resolution()

    def union_values(self) -> np.ndarray:
        """Soft any-object occupancy map (max over objects)."""
        stacked = np.stack([m.values for m in self.masks])
        return stacked.max(axis=0)


def dot_similarity(query_key: FeatureGrid, memory_key) -> np.ndarray:
    """Dense dot-product similarity between all location pairs.

    Entry (i, j) is the channel-wise inner product of query location i and
    memory location j; shape (H'q*W'q, H'm*W'm). `memory_key` may be a
    FeatureGrid or a StackedGrid.
    """
    if query_key.channels != memory_key.channels:
        raise DimensionError(
            f"channel mismatch: query has {query_key.channels}, "
            f"memory has {memory_key.channels}")
    return kernels.similarity(
        query_key.location_matrix(), memory_key.location_matrix(), 1.0)


def row_normalize(similarity: np.ndarray, mode: str = "softmax") -> np.ndarray:
    """Turn a similarity matrix into row-stochastic weights.

    softmax subtracts the row max before exponentiating (stable, nonnegative
    convex weights); raw_sum divides by the plain row sum and raises
    DegenerateRowError when a row sum is not strictly positive.
    """
    sim = np.asarray(similarity, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[1] < 1:
        raise DimensionError(f"expected a 2-d matrix, got shape {sim.shape}")
    return kernels.normalize_rows(sim, mode)
