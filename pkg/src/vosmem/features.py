"""Stand-in feature extraction and label decoding.

extract_descriptor plays the role of the image encoders: the key carries
per-cell block-mean color plus a 2-channel normalized position ramp, the
value carries the color statistics plus (N+1) soft object-occupancy
channels (background first). decode_labels inverts the value encoding:
retrieved label channels -> per-cell argmax -> nearest-neighbor upsample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (FeatureGrid, LabeledMaskSet, ObjectMask, block_mean,
                   upsample_nearest)
from .errors import DecodeError, DimensionError, ResolutionError
from .readout import ReadOutput

KEY_COLOR_CHANNELS = 3
KEY_POSITION_CHANNELS = 2


@dataclass(frozen=True)
class FrameDescriptor:
    """Key/value grids for one frame at descriptor resolution."""

    key: FeatureGrid
    value: FeatureGrid

    def __post_init__(self):
        if (self.key.height, self.key.width) != (self.value.height,
                                                 self.value.width):
            raise DimensionError("key and value grids must share resolution")

    @property
    def grid_height(self) -> int:
        return self.key.height

    @property
    def grid_width(self) -> int:
        return self.key.width


def position_ramps(grid_h: int, grid_w: int) -> np.ndarray:
    """Canonical (grid_h, grid_w, 2) position encoding: channel 0 is the
    row ramp (r + 0.5) / grid_h, channel 1 the column ramp."""
    rows = (np.arange(grid_h) + 0.5) / grid_h
    cols = (np.arange(grid_w) + 0.5) / grid_w
    out = np.empty((grid_h, grid_w, 2))
    out[:, :, 0] = rows[:, None]
    out[:, :, 1] = cols[None, :]
    return out


def extract_descriptor(frame: np.ndarray, labels: LabeledMaskSet | None,
                       stride: int, *,
                       object_count: int | None = None) -> FrameDescriptor:
    """Encode a frame (and its masks, if known) into key/value grids.

    With labels=None (a query frame whose masks are not yet predicted) the
    value's occupancy channels default to all-background; `object_count`
    must then be given to size them.
    """
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) frame, got {arr.shape}")
    h, w = arr.shape[:2]
    if stride < 1 or h % stride or w % stride:
        raise ResolutionError(f"stride {stride} does not divide {h}x{w}")
    grid_h, grid_w = h // stride, w // stride

    color = block_mean(arr, grid_h, grid_w)
    key = np.concatenate([color, position_ramps(grid_h, grid_w)], axis=2)

    if labels is None:
        if object_count is None:
            raise ValueError("object_count is required when labels is None")
        n = object_count
        occupancy = np.zeros((grid_h, grid_w, n + 1))
        occupancy[:, :, 0] = 1.0
    else:
        if labels.resolution() != (h, w):
            raise DimensionError(
                f"labels resolution {labels.resolution()} != frame {h}x{w}")
        n = labels.object_count
        occ = np.stack([block_mean(m.values, grid_h, grid_w)
                        for m in labels.masks], axis=2)
        total = occ.sum(axis=2)
        background = np.clip(1.0 - total, 0.0, None)
        occupancy = np.concatenate([background[:, :, None], occ], axis=2)
        occupancy /= occupancy.sum(axis=2, keepdims=True)

    value = np.concatenate([color, occupancy], axis=2)
    return FrameDescriptor(key=FeatureGrid.from_array(key),
                           value=FeatureGrid.from_array(value))


def decode_labels(read_output: ReadOutput, object_count: int,
                  stride: int) -> LabeledMaskSet:
    """Turn retrieved label channels into hard full-resolution masks.

    The last (object_count + 1) channels of the combined grid are the
    retrieved occupancy distribution; each cell takes the argmax label
    (ties go to the lowest channel, i.e. background), then the label map is
    upsampled to frame resolution by nearest neighbor.
    """
    n = object_count
    grid = read_output.combined
    if n < 1:
        raise DecodeError("object_count must be >= 1")
    if grid.channels < n + 1:
        raise DecodeError(
            f"read output carries {grid.channels} channels; decoding needs "
            f"at least {n + 1} label channels")
    soft = np.asarray(grid.location_matrix()[:, -(n + 1):])
    soft = np.clip(soft, 0.0, None)  # raw_sum weights can dip negative
    labels = soft.argmax(axis=1).reshape(grid.height, grid.width)
    full = upsample_nearest(labels, stride, stride)
    h, w = full.shape
    masks = tuple(ObjectMask(h, w, (full == i).astype(np.float64))
                  for i in range(1, n + 1))
    return LabeledMaskSet(masks)
