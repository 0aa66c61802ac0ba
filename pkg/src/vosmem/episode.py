"""Per-video inference loop and experiment sweeps.

Each frame t >= 1 is segmented by matching its descriptor against the
memory bank snapshot, decoding the retrieved label channels, scoring the
result, and offering it to the bank's admission policy. Frame 0 always uses
the ground-truth annotation (one-shot setting). Everything is deterministic
given (video spec, policy, scorer, seed).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import binary_dilation

from .core import FeatureGrid, LabeledMaskSet, ObjectMask, block_mean, \
    upsample_nearest
from .errors import DegenerateRowError, SpecError, VosmemError
from .features import KEY_COLOR_CHANNELS, decode_labels, extract_descriptor
from .membank import MemoryBank
from .metrics import frame_scores
from .quality import OracleScorer, QualityTracker
from .readout import PriorGate, memory_read, prior_enhance
from .synth import SyntheticVideo, VideoSpec, generate_video

SWEEP_AXES = ("threshold", "capacity", "interval")

# (translate cells, dilate cells): "mild" lands around IoU 0.45, "severe"
# at 0.25 or below for the default disc sizes, bracketing the 0.4 / 0.8
# admission gates used by the threshold experiments.
CORRUPTION_SEVERITIES = {
    "mild": (1, 0),
    "severe": (3, 1),
}


@dataclass(frozen=True)
class PolicyConfig:
    """Memory-policy and read-path knobs for one episode."""

    sigma: float = 0.8
    capacity: int | None = 25
    interval: int = 5
    eviction: str = "dynamic"  # dynamic | fifo_recent | unlimited
    prior: str = "off"         # off | weak | strong
    prior_seed: int = 0
    prior_beta: float = 5.0
    normalize: str = "softmax"  # softmax | raw_sum
    similarity_scale: float = 200.0
    position_weight: float = 0.5
    l2_normalize_keys: bool = False
    channel_scale: bool = False
    decay: float = 1.0
    consistency_weight: float = 1.0
    protect_first: bool = True
    stride: int = 4

    def __post_init__(self):
        if self.eviction not in ("dynamic", "fifo_recent", "unlimited"):
            raise SpecError(f"unknown eviction mode {self.eviction!r}")
        if self.prior not in ("off", "weak", "strong"):
            raise SpecError(f"unknown prior mode {self.prior!r}")
        if self.normalize not in ("softmax", "raw_sum"):
            raise SpecError(f"unknown normalization mode {self.normalize!r}")
        if self.capacity is not None and self.capacity < 1:
            raise SpecError("capacity must be >= 1")
        if self.interval < 1:
            raise SpecError("interval must be >= 1")
        if not 0.0 <= self.sigma <= 1.0:
            raise SpecError("sigma must lie in [0, 1]")

    def make_bank(self) -> MemoryBank:
        if self.eviction == "unlimited":
            return MemoryBank(capacity=None, sigma=self.sigma,
                              interval=self.interval, eviction="dynamic",
                              decay=self.decay,
                              consistency_weight=self.consistency_weight,
                              protect_first=self.protect_first)
        return MemoryBank(capacity=self.capacity, sigma=self.sigma,
                          interval=self.interval, eviction=self.eviction,
                          decay=self.decay,
                          consistency_weight=self.consistency_weight,
                          protect_first=self.protect_first)


@dataclass(frozen=True)
class CorruptionEvent:
    """Replace frame `frame`'s decoded masks with a translated/dilated
    version before scoring and admission (a simulated segmentation failure)."""

    frame: int
    severity: str = "severe"

    def __post_init__(self):
        if self.severity not in CORRUPTION_SEVERITIES:
            raise SpecError(f"unknown corruption severity {self.severity!r}")


@dataclass(frozen=True)
class ScorerConfig:
    noise_sigma: float = 0.0
    seed: int = 0
    corruptions: tuple[CorruptionEvent, ...] = ()

    def corruption_at(self, t: int) -> CorruptionEvent | None:
        for ev in self.corruptions:
            if ev.frame == t:
                return ev
        return None


@dataclass
class EvalResult:
    """Per-frame and aggregate outcome of one episode.

    Means are over the predicted frames (t >= 1); frame 0 is the given
    annotation and scores 1.0 by construction.
    """

    frame_j: np.ndarray
    frame_f: np.ndarray
    wall_ms: np.ndarray
    occupancy: np.ndarray
    decisions: tuple[str, ...]
    evicted: tuple[int, ...]
    quality_flagged: bool = False
    rawsum_fallbacks: int = 0

    @property
    def frame_jf(self) -> np.ndarray:
        return (self.frame_j + self.frame_f) / 2.0

    @property
    def mean_j(self) -> float:
        return float(self.frame_j[1:].mean())

    @property
    def mean_f(self) -> float:
        return float(self.frame_f[1:].mean())

    @property
    def mean_jf(self) -> float:
        return (self.mean_j + self.mean_f) / 2.0


def project_key(key: FeatureGrid, position_weight: float,
                role: str) -> FeatureGrid:
    """Map a descriptor key into the matching space.

    Position channels are re-weighted, then one channel is appended: a
    constant 1 on the query side and -|k|^2/2 on the memory side. The dot
    product of a projected query row q and memory row m is then
    q.m - |m|^2/2, which under per-row softmax equals ranking by
    -|q - m|^2/2: memory cells are matched by squared feature distance
    instead of raw magnitude, while the read stays a plain dot product.
    """
    data = key.location_matrix().copy()
    data[:, KEY_COLOR_CHANNELS:] *= position_weight
    if role == "query":
        extra = np.ones((data.shape[0], 1))
    elif role == "memory":
        extra = -0.5 * (data * data).sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"role must be 'query' or 'memory', got {role!r}")
    out = np.concatenate([data, extra], axis=1)
    return FeatureGrid(key.height, key.width, key.channels + 1, out)


def corrupt_mask_set(masks: LabeledMaskSet, severity: str, cell: int,
                     seed: int) -> LabeledMaskSet:
    """Translate and dilate each object mask at cell granularity.

    The shift direction is drawn deterministically from `seed`; overlaps
    created by the corruption are resolved in object order.
    """
    translate, dilate = CORRUPTION_SEVERITIES[severity]
    h, w = masks.resolution()
    grid_h, grid_w = h // cell, w // cell
    rng = np.random.default_rng(seed)
    directions = [(0, 1), (1, 0), (0, -1), (-1, 0),
                  (1, 1), (1, -1), (-1, 1), (-1, -1)]
    out = []
    claimed = np.zeros((grid_h, grid_w), dtype=bool)
    for mask in masks.masks:
        cells = block_mean(mask.values, grid_h, grid_w) >= 0.5
        dy, dx = directions[int(rng.integers(len(directions)))]
        shifted = _shift(cells, dy * translate, dx * translate)
        if dilate > 0:
            shifted = binary_dilation(shifted, iterations=dilate)
        shifted &= ~claimed
        claimed |= shifted
        full = upsample_nearest(shifted.astype(np.float64), cell, cell)
        out.append(ObjectMask(h, w, full))
    return LabeledMaskSet(tuple(out))


def _shift(cells: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(cells)
    h, w = cells.shape
    src_r = slice(max(0, -dy), min(h, h - dy))
    dst_r = slice(max(0, dy), min(h, h + dy))
    src_c = slice(max(0, -dx), min(w, w - dx))
    dst_c = slice(max(0, dx), min(w, w + dx))
    out[dst_r, dst_c] = cells[src_r, src_c]
    return out


def run_episode(video: VideoSpec | SyntheticVideo, policy: PolicyConfig,
                scorer: ScorerConfig) -> EvalResult:
    """Segment every frame of the video through the memory pipeline."""
    if isinstance(video, VideoSpec):
        video = generate_video(video)
    if video.resolution[0] % policy.stride or \
            video.resolution[1] % policy.stride:
        raise SpecError("stride must divide the video resolution")

    n = video.object_count
    frames = video.frame_count
    oracle = OracleScorer(noise_sigma=scorer.noise_sigma, seed=scorer.seed)
    tracker = QualityTracker()
    bank = policy.make_bank()
    # The gate sees the projected query key: color + position + 1 constant.
    gate = PriorGate.from_seed(policy.prior, KEY_COLOR_CHANNELS + 3,
                               policy.prior_seed, beta=policy.prior_beta)

    frame_j = np.ones(frames)
    frame_f = np.ones(frames)
    wall_ms = np.zeros(frames)
    occupancy = np.zeros(frames, dtype=np.int64)
    decisions: list[str] = []
    evicted: list[int] = []
    fallbacks = 0

    # Frame 0: the annotation is the prediction and the protected memory.
    t0 = time.perf_counter()
    image0 = video.frame(0)
    truth0 = video.masks(0)
    desc0 = extract_descriptor(image0, truth0, policy.stride)
    scores0 = oracle.per_object(image0, truth0, truth0, 0)
    report0 = tracker.report(0, scores0)
    outcome = bank.consider_admission(
        report0, project_key(desc0.key, policy.position_weight, "memory"),
        desc0.value, 0)
    wall_ms[0] = (time.perf_counter() - t0) * 1e3
    occupancy[0] = bank.occupancy
    decisions.append(outcome.decision.value)
    evicted.append(-1)
    previous = truth0

    for t in range(1, frames):
        image = video.frame(t)
        truth = video.masks(t)
        start = time.perf_counter()

        try:
            desc = extract_descriptor(image, None, policy.stride,
                                      object_count=n)
            query_key = prior_enhance(
                project_key(desc.key, policy.position_weight, "query"),
                _prior_mask(previous), gate)
            mem_keys, mem_values = bank.snapshot_keys_values()
            try:
                read = memory_read(query_key, desc.value, mem_keys,
                                   mem_values, policy.normalize,
                                   scale=policy.similarity_scale,
                                   l2_normalize=policy.l2_normalize_keys,
                                   channel_scale=policy.channel_scale)
            except DegenerateRowError:
                fallbacks += 1
                read = memory_read(query_key, desc.value, mem_keys,
                                   mem_values, "softmax",
                                   scale=policy.similarity_scale,
                                   l2_normalize=policy.l2_normalize_keys,
                                   channel_scale=policy.channel_scale)
            predicted = decode_labels(read, n, policy.stride)

            event = scorer.corruption_at(t)
            if event is not None:
                predicted = corrupt_mask_set(predicted, event.severity,
                                             policy.stride,
                                             seed=scorer.seed * 69_623 + t)

            scores = oracle.per_object(image, predicted, truth, t)
            report = tracker.report(t, scores)

            if bank.storage_due(t):
                mem_desc = extract_descriptor(image, predicted, policy.stride)
                outcome = bank.consider_admission(
                    report,
                    project_key(mem_desc.key, policy.position_weight,
                                "memory"),
                    mem_desc.value, t)
            else:
                outcome = bank.consider_admission(report, desc.key,
                                                  desc.value, t)
        except VosmemError as exc:
            # a frame-level failure aborts the episode with the frame index
            raise type(exc)(f"frame {t}: {exc}") from exc
        wall_ms[t] = (time.perf_counter() - start) * 1e3

        j, f = frame_scores(predicted, truth)
        frame_j[t] = j
        frame_f[t] = f
        occupancy[t] = bank.occupancy
        decisions.append(outcome.decision.value)
        evicted.append(outcome.evicted.frame_index if outcome.evicted else -1)
        previous = predicted

    return EvalResult(frame_j=frame_j, frame_f=frame_f, wall_ms=wall_ms,
                      occupancy=occupancy, decisions=tuple(decisions),
                      evicted=tuple(evicted),
                      quality_flagged=tracker.flagged,
                      rawsum_fallbacks=fallbacks)


def _prior_mask(masks: LabeledMaskSet) -> ObjectMask:
    return ObjectMask(masks.height, masks.width, masks.union_values())


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: str
    seed_count: int
    mean_j: float
    mean_f: float
    mean_jf: float


def seeded_variant(video: VideoSpec, policy: PolicyConfig,
                   scorer: ScorerConfig, seed: int):
    """Derive the per-seed configuration (seed 0 is the base itself)."""
    return (replace(video, seed=video.seed + seed),
            replace(policy, prior_seed=policy.prior_seed + seed),
            replace(scorer, seed=scorer.seed + seed))


def apply_axis(policy: PolicyConfig, axis: str, value) -> PolicyConfig:
    """Override one policy axis for a sweep; capacity accepts 'unlimited'."""
    if axis == "threshold":
        return replace(policy, sigma=float(value))
    if axis == "capacity":
        if isinstance(value, str) and value.strip().lower() in ("unlimited",
                                                                "inf"):
            return replace(policy, capacity=None, eviction="unlimited")
        return replace(policy, capacity=int(value))
    if axis == "interval":
        return replace(policy, interval=int(value))
    raise SpecError(f"unknown sweep axis {axis!r}; expected one of "
                    f"{SWEEP_AXES}")


def _sweep_cell(args):
    video, policy, scorer, axis, value, seed = args
    v, p, s = seeded_variant(video, apply_axis(policy, axis, value),
                             scorer, seed)
    result = run_episode(v, p, s)
    return value, seed, result.mean_j, result.mean_f, result.mean_jf


def sweep(video: VideoSpec, axis: str, values, policy: PolicyConfig,
          scorer: ScorerConfig, seeds, workers: int = 1) -> list[SweepRow]:
    """One row per axis value, averaged over seeds; deterministic given
    seeds regardless of worker count."""
    values = list(values)
    seeds = [int(s) for s in seeds]
    if not values:
        raise SpecError("sweep needs a nonempty value list")
    if not seeds:
        raise SpecError("sweep needs a nonempty seed list")
    for v in values:
        apply_axis(policy, axis, v)  # validate before running anything
    jobs = [(video, policy, scorer, axis, v, s) for v in values for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_sweep_cell, jobs))
    else:
        cells = [_sweep_cell(job) for job in jobs]
    rows = []
    for v in values:
        picked = [c for c in cells if c[0] == v]
        rows.append(SweepRow(
            axis=axis, value=str(v), seed_count=len(seeds),
            mean_j=float(np.mean([c[2] for c in picked])),
            mean_f=float(np.mean([c[3] for c in picked])),
            mean_jf=float(np.mean([c[4] for c in picked]))))
    return rows
