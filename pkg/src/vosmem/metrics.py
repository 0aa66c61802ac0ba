"""DAVIS-style evaluation: region IoU (J), boundary F-measure, and their
per-frame aggregation over objects."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import binary_dilation

from .core import LabeledMaskSet, ObjectMask
from .errors import DimensionError
from .quality import mask_iou


def default_tolerance(height: int, width: int) -> int:
    """DAVIS convention: ceil(0.008 * image diagonal), at least 1 pixel."""
    return max(1, math.ceil(0.008 * math.hypot(height, width)))


def boundary_pixels(mask: ObjectMask) -> np.ndarray:
    """Boolean map of foreground pixels with a background (or out-of-frame)
    4-neighbor."""
    fg = mask.binary()
    padded = np.pad(fg, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return fg & ~interior


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    return (span[:, None] ** 2 + span[None, :] ** 2) <= radius ** 2


def boundary_f(prediction: ObjectMask, truth: ObjectMask,
               tolerance_px: int | None = None) -> float:
    """Contour F-measure: precision/recall of boundary pixels matched within
    `tolerance_px` (dilation with a disk), F = 2PR/(P+R).

    Both boundaries empty -> 1.0; exactly one empty -> 0.0.
    """
    if prediction.resolution() != truth.resolution():
        raise DimensionError(
            f"resolution mismatch: {prediction.resolution()} vs "
            f"{truth.resolution()}")
    if tolerance_px is None:
        tolerance_px = default_tolerance(*truth.resolution())
    if tolerance_px < 1:
        raise ValueError("tolerance_px must be >= 1")
    pb = boundary_pixels(prediction)
    tb = boundary_pixels(truth)
    np_pb = int(pb.sum())
    np_tb = int(tb.sum())
    if np_pb == 0 and np_tb == 0:
        return 1.0
    if np_pb == 0 or np_tb == 0:
        return 0.0
    disk = _disk(tolerance_px)
    precision = int((pb & binary_dilation(tb, structure=disk)).sum()) / np_pb
    recall = int((tb & binary_dilation(pb, structure=disk)).sum()) / np_tb
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def frame_scores(prediction: LabeledMaskSet, truth: LabeledMaskSet,
                 tolerance_px: int | None = None) -> tuple[float, float]:
    """Per-frame (J, F): means over objects of mask IoU and boundary F."""
    j = float(np.mean([mask_iou(p, t)
                       for p, t in zip(prediction.masks, truth.masks)]))
    f = float(np.mean([boundary_f(p, t, tolerance_px)
                       for p, t in zip(prediction.masks, truth.masks)]))
    return j, f
