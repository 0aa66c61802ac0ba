"""vosmem: a streaming, quality-gated dynamic memory engine for
mask-propagation video object segmentation.

The package decides which frames enter a bounded memory bank (quality-gated
interval admission with deferral), which leave (accuracy + recency
reference scoring), and how the bank is queried (dense space-time read),
and ships a deterministic synthetic-video harness with DAVIS-style metrics
to exercise the policies end to end.
"""

__version__ = "0.1.0"

from .core import (FeatureGrid, LabeledMaskSet, ObjectMask, dot_similarity,
                   row_normalize)
from .episode import (CorruptionEvent, EvalResult, PolicyConfig,
                      ScorerConfig, run_episode, sweep)
from .features import FrameDescriptor, decode_labels, extract_descriptor
from .membank import (AdmissionDecision, AdmissionOutcome, MemoryBank,
                      MemoryEntry, ReferenceScore, StackedGrid,
                      reference_score, temporal_score)
from .metrics import boundary_f, frame_scores
from .quality import (OracleScorer, QualityReport, QualityScorer,
                      QualityTracker, aggregate_and_normalize, mask_iou,
                      oracle_score, scorer_mse)
from .readout import (PriorGate, ReadOutput, downsample_mask, memory_read,
                      prior_enhance)
from .synth import (DistractorSpec, MoverSpec, Recolor, SyntheticVideo,
                    VideoSpec, generate_video)

__all__ = [
    "AdmissionDecision", "AdmissionOutcome", "CorruptionEvent",
    "DistractorSpec", "EvalResult", "FeatureGrid", "FrameDescriptor",
    "LabeledMaskSet", "MemoryBank", "MemoryEntry", "MoverSpec", "ObjectMask",
    "OracleScorer", "PolicyConfig", "PriorGate", "QualityReport",
    "QualityScorer", "QualityTracker", "ReadOutput", "Recolor",
    "ReferenceScore",
    "ScorerConfig", "StackedGrid", "SyntheticVideo", "VideoSpec",
    "aggregate_and_normalize", "boundary_f", "decode_labels",
    "dot_similarity", "downsample_mask", "extract_descriptor",
    "frame_scores", "generate_video", "mask_iou", "memory_read",
    "oracle_score", "prior_enhance", "reference_score", "row_normalize",
    "run_episode", "scorer_mse", "sweep", "temporal_score",
]
