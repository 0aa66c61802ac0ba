"""Segmentation-quality scoring: per-object scores, per-frame aggregation,
and normalization against the annotated first frame.

The trained quality-prediction network is out of scope here; its functional
contract is filled by an IoU oracle with optional gaussian noise, whose
noiseless output is exactly the training target (per-object mask IoU).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .core import LabeledMaskSet, ObjectMask
from .errors import AlignmentError, DegenerateAnchorError, DimensionError

# Floor applied to a pathologically small first-frame score before it is
# used as the normalization anchor; such videos are flagged.
ANCHOR_FLOOR = 1e-6


def mask_iou(prediction: ObjectMask, truth: ObjectMask) -> float:
    """Intersection over union of the two masks, binarized at 0.5.

    Both masks empty counts as a correctly predicted absent object (1.0);
    empty versus nonempty is 0.0.
    """
    if prediction.resolution() != truth.resolution():
        raise DimensionError(
            f"resolution mismatch: {prediction.resolution()} vs "
            f"{truth.resolution()}")
    p = prediction.binary()
    t = truth.binary()
    union = int(np.logical_or(p, t).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(p, t).sum())
    return inter / union


def oracle_score(prediction: LabeledMaskSet, truth: LabeledMaskSet,
                 noise_sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """Per-object scores: clamp(mask IoU + gaussian(0, noise_sigma), 0, 1).

    noise_sigma = 0 reproduces the per-object IoUs bit for bit. The noise
    recipe is fixed: one draw per object, in object order, from
    numpy.random.default_rng(seed).normal(0, noise_sigma, N).
    """
    if prediction.object_count != truth.object_count:
        raise AlignmentError(
            f"object count mismatch: {prediction.object_count} vs "
            f"{truth.object_count}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    ious = np.array([mask_iou(p, t)
                     for p, t in zip(prediction.masks, truth.masks)])
    if noise_sigma == 0:
        return ious
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma, ious.shape[0])
    return np.clip(ious + noise, 0.0, 1.0)


@dataclass(frozen=True)
class QualityReport:
    """Quality of one frame's segmentation.

    frame_score is the unweighted mean of the per-object scores;
    normalized_score is frame_score divided by the first frame's score
    (exactly 1.0 for the annotated frame itself).
    """

    frame_index: int
    per_object_scores: tuple[float, ...]
    frame_score: float
    normalized_score: float


def aggregate_and_normalize(per_object_scores, first_frame_score: float,
                            frame_index: int) -> QualityReport:
    """Mean the per-object scores and normalize by the first frame's score."""
    scores = np.asarray(per_object_scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise AlignmentError("per_object_scores must be a nonempty 1-d list")
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError("per-object scores must lie in [0, 1]")
    if frame_index < 0:
        raise ValueError("frame_index must be nonnegative")
    if first_frame_score <= 0.0:
        raise DegenerateAnchorError(
            f"first-frame score {first_frame_score!r} is not strictly positive")
    frame_score = float(scores.mean())
    if frame_index == 0:
        normalized = 1.0
    else:
        normalized = frame_score / first_frame_score
    return QualityReport(frame_index, tuple(float(s) for s in scores),
                         frame_score, normalized)


def scorer_mse(predicted_scores, predictions: LabeledMaskSet,
               truths: LabeledMaskSet) -> float:
    """Mean squared difference between predicted scores and per-object IoUs."""
    scores = np.asarray(predicted_scores, dtype=np.float64)
    if predictions.object_count != truths.object_count:
        raise AlignmentError(
            f"object count mismatch: {predictions.object_count} vs "
            f"{truths.object_count}")
    if scores.shape != (predictions.object_count,):
        raise AlignmentError(
            f"expected {predictions.object_count} scores, got {scores.shape}")
    ious = np.array([mask_iou(p, t)
                     for p, t in zip(predictions.masks, truths.masks)])
    return float(np.mean((scores - ious) ** 2))


class QualityScorer(Protocol):
    """Stateless per-frame quality evaluator.

    Maps (frame image, predicted masks, optional ground truth, frame index)
    to one score in [0, 1] per object, deterministically for a fixed seed.
    Implementations that do not need ground truth may ignore it.
    """

    def per_object(self, frame, prediction: LabeledMaskSet,
                   truth: LabeledMaskSet | None,
                   frame_index: int) -> np.ndarray: ...


@dataclass(frozen=True)
class OracleScorer:
    """Deterministic stand-in for a learned quality scorer.

    Stateless apart from the seed; per-frame noise is derived from
    (seed, frame_index) so episodes are reproducible frame by frame.
    """

    noise_sigma: float = 0.0
    seed: int = 0

    def per_object(self, frame, prediction: LabeledMaskSet,
                   truth: LabeledMaskSet, frame_index: int) -> np.ndarray:
        del frame  # the oracle only needs masks
        return oracle_score(prediction, truth, self.noise_sigma,
                            seed=self.seed * 1_000_003 + frame_index)


class QualityTracker:
    """Per-video score aggregation anchored to the annotated first frame.

    A first-frame score below ANCHOR_FLOOR is floored there and the video is
    flagged, so normalization never divides by (near) zero.
    """

    def __init__(self):
        self._anchor: float | None = None
        self.flagged = False

    @property
    def anchor(self) -> float | None:
        return self._anchor

    def report(self, frame_index: int, per_object_scores) -> QualityReport:
        if frame_index == 0:
            raw = float(np.mean(np.asarray(per_object_scores, dtype=np.float64)))
            if raw < ANCHOR_FLOOR:
                self._anchor = ANCHOR_FLOOR
                self.flagged = True
            else:
                self._anchor = raw
        elif self._anchor is None:
            raise DegenerateAnchorError(
                "frame 0 must be reported before later frames")
        return aggregate_and_normalize(per_object_scores, self._anchor,
                                       frame_index)
