"""Bounded, quality-gated reference memory.

Admission is triggered every `interval` frames; a frame that fails the
quality gate defers the trigger to the next frame. At capacity, the entry
with the lowest reference score (accuracy + exponential recency) is evicted.
The annotated first frame is protected from eviction by default.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import FeatureGrid
from .errors import (CausalityError, DimensionError, EmptyMemoryError,
                     NoEvictableError, OrderingError)
from .quality import QualityReport

EVICTION_MODES = ("dynamic", "fifo_recent")


def temporal_score(k: int, t: int, decay: float = 1.0) -> float:
    """Recency term exp(-decay * |t - k|) for memory frame k at time t.

    decay defaults to 1 (score in frames); k must not lie in the future.
    """
    if k > t:
        raise CausalityError(f"memory frame {k} is later than current frame {t}")
    return math.exp(-decay * (t - k))


@dataclass(frozen=True)
class ReferenceScore:
    """Eviction key of one stored entry at time t: accuracy + recency.

    `consistency` already includes the configured weight, so
    total == accuracy + consistency always holds.
    """

    frame_index: int
    accuracy: float
    consistency: float
    total: float


@dataclass(frozen=True)
class MemoryEntry:
    """One stored reference frame: key/value grids plus quality metadata."""

    frame_index: int
    key: FeatureGrid
    value: FeatureGrid
    normalized_quality: float
    protected: bool = False

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        if (self.key.height, self.key.width) != (self.value.height,
                                                 self.value.width):
            raise DimensionError(
                "entry key and value must share the same grid resolution")
        if self.normalized_quality < 0:
            raise ValueError("normalized_quality must be >= 0")


def reference_score(entry: MemoryEntry, t: int, decay: float = 1.0,
                    consistency_weight: float = 1.0) -> ReferenceScore:
    """Accuracy + weighted recency for `entry` as seen from frame t."""
    consistency = consistency_weight * temporal_score(entry.frame_index, t, decay)
    return ReferenceScore(entry.frame_index, entry.normalized_quality,
                          consistency, entry.normalized_quality + consistency)


class AdmissionDecision(str, Enum):
    ADMITTED = "admitted"
    DEFERRED = "deferred"
    NOT_DUE = "not_due"


@dataclass(frozen=True)
class AdmissionOutcome:
    decision: AdmissionDecision
    entry: MemoryEntry | None = None
    evicted: MemoryEntry | None = None


@dataclass(frozen=True)
class StackedGrid:
    """Keys or values of several entries concatenated along the location axis.

    Row blocks appear in entry order; `offsets` holds each entry's start row
    plus the total location count, so the stack splits back losslessly.
    """

    data: np.ndarray
    channels: int
    offsets: tuple[int, ...]

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != self.channels:
            raise DimensionError(
                f"stacked data must be (locations, {self.channels})")
        if not self.offsets or self.offsets[0] != 0 \
                or self.offsets[-1] != data.shape[0]:
            raise DimensionError("offsets must run from 0 to the location count")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_grids(cls, grids) -> "StackedGrid":
        grids = list(grids)
        if not grids:
            raise EmptyMemoryError("cannot stack zero grids")
        channels = grids[0].channels
        for g in grids:
            if g.channels != channels:
                raise DimensionError("all stacked grids must share channels")
        offsets = [0]
        for g in grids:
            offsets.append(offsets[-1] + g.locations)
        data = np.concatenate([g.location_matrix() for g in grids], axis=0)
        return cls(data, channels, tuple(offsets))

    @property
    def locations(self) -> int:
        return self.data.shape[0]

    @property
    def entry_count(self) -> int:
        return len(self.offsets) - 1

    def location_matrix(self) -> np.ndarray:
        return self.data

    def split(self) -> list[np.ndarray]:
        """Per-entry (locations, channels) views, in stored order."""
        return [self.data[a:b] for a, b in zip(self.offsets, self.offsets[1:])]


def _digest(grid: FeatureGrid) -> str:
    return hashlib.sha256(grid.data.tobytes()).hexdigest()[:12]


class MemoryBank:
    """Single-writer bounded store of reference frames.

    capacity=None disables the bound (and eviction) entirely; otherwise
    `eviction` picks the victim rule: "dynamic" evicts the lowest reference
    score, "fifo_recent" the oldest non-protected entry.
    """

    def __init__(self, capacity: int | None = 25, sigma: float = 0.8,
                 interval: int = 5, eviction: str = "dynamic",
                 decay: float = 1.0, consistency_weight: float = 1.0,
                 protect_first: bool = True):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be >= 1 (or None for unlimited)")
        if not 0.0 <= sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if interval < 1:
            raise ValueError("interval must be >= 1")
        if eviction not in EVICTION_MODES:
            raise ValueError(f"eviction must be one of {EVICTION_MODES}")
        if decay <= 0:
            raise ValueError("decay must be > 0")
        self.capacity = capacity
        self.sigma = sigma
        self.interval = interval
        self.eviction = eviction
        self.decay = decay
        self.consistency_weight = consistency_weight
        self.protect_first = protect_first
        self.pending_trigger = False
        self.entries: list[MemoryEntry] = []

    @property
    def occupancy(self) -> int:
        return len(self.entries)

    def frame_indices(self) -> tuple[int, ...]:
        return tuple(e.frame_index for e in self.entries)

    def storage_due(self, t: int) -> bool:
        return t % self.interval == 0 or self.pending_trigger

    def consider_admission(self, report: QualityReport, key: FeatureGrid,
                           value: FeatureGrid, t: int) -> AdmissionOutcome:
        """Apply the interval trigger and quality gate to frame t.

        Frame 0 (the annotation) is always admitted and protected. Otherwise
        storage is due when t hits the interval or a deferral is pending;
        a due frame is admitted when its normalized score clears sigma, and
        deferred (trigger carried to the next frame) when it does not.
        Admission at capacity first evicts per the configured rule.
        """
        if self.entries and t <= self.entries[-1].frame_index:
            raise OrderingError(
                f"frame {t} is not beyond the last stored frame "
                f"{self.entries[-1].frame_index}")
        if t == 0:
            entry = MemoryEntry(0, key, value, report.normalized_score,
                                protected=self.protect_first)
            self.entries.append(entry)
            return AdmissionOutcome(AdmissionDecision.ADMITTED, entry=entry)
        if not self.storage_due(t):
            return AdmissionOutcome(AdmissionDecision.NOT_DUE)
        if report.normalized_score < self.sigma:
            self.pending_trigger = True
            return AdmissionOutcome(AdmissionDecision.DEFERRED)
        evicted = None
        if self.capacity is not None and len(self.entries) >= self.capacity:
            evicted = self._evict_for_admission(t)
        entry = MemoryEntry(t, key, value, report.normalized_score,
                            protected=False)
        self.entries.append(entry)
        self.pending_trigger = False
        return AdmissionOutcome(AdmissionDecision.ADMITTED, entry=entry,
                                evicted=evicted)

    def _evict_for_admission(self, t: int) -> MemoryEntry:
        if self.eviction == "dynamic":
            return self.evict_lowest(t)
        return self.evict_oldest()

    def evict_lowest(self, t: int) -> MemoryEntry:
        """Remove and return the non-protected entry with the smallest
        reference score at time t; ties evict the smaller frame index."""
        candidates = [e for e in self.entries if not e.protected]
        if not candidates:
            raise NoEvictableError("only protected entries present")
        victim = min(
            candidates,
            key=lambda e: (reference_score(e, t, self.decay,
                                           self.consistency_weight).total,
                           e.frame_index))
        self.entries.remove(victim)
        return victim

    def evict_oldest(self) -> MemoryEntry:
        """Remove and return the oldest non-protected entry (recency baseline)."""
        candidates = [e for e in self.entries if not e.protected]
        if not candidates:
            raise NoEvictableError("only protected entries present")
        victim = min(candidates, key=lambda e: e.frame_index)
        self.entries.remove(victim)
        return victim

    def snapshot_keys_values(self) -> tuple[StackedGrid, StackedGrid]:
        """Stack all entry keys and values along the location axis,
        preserving entry order."""
        if not self.entries:
            raise EmptyMemoryError("memory bank is empty")
        keys = StackedGrid.from_grids(e.key for e in self.entries)
        values = StackedGrid.from_grids(e.value for e in self.entries)
        return keys, values

    def reference_scores(self, t: int) -> list[ReferenceScore]:
        return [reference_score(e, t, self.decay, self.consistency_weight)
                for e in self.entries]

    def state_text(self) -> str:
        """Deterministic text form of the bank (for golden-file tests)."""
        cap = "unlimited" if self.capacity is None else str(self.capacity)
        lines = [
            f"capacity={cap} sigma={self.sigma:.10g} interval={self.interval} "
            f"eviction={self.eviction} pending={int(self.pending_trigger)}"
        ]
        for e in self.entries:
            lines.append(
                f"k={e.frame_index} qual={e.normalized_quality:.10g} "
                f"protected={int(e.protected)} key={_digest(e.key)} "
                f"value={_digest(e.value)}")
        return "\n".join(lines) + "\n"
