import numpy as np
import pytest

from vosmem.core import LabeledMaskSet, ObjectMask
from vosmem.episode import (CorruptionEvent, PolicyConfig, ScorerConfig,
                            apply_axis, corrupt_mask_set, project_key,
                            run_episode, seeded_variant, sweep)
from vosmem.errors import SpecError
from vosmem.features import extract_descriptor
from vosmem.quality import mask_iou
from vosmem.synth import MoverSpec, VideoSpec

RED = (0.9, 0.15, 0.15)


def static_spec(frames=40):
    return VideoSpec(frame_count=frames, height=32, width=32, cell=4,
                     objects=(MoverSpec("disc", 1.5, RED, ((4.0, 4.0),)),),
                     seed=3)


def moving_spec(frames=60, **kw):
    defaults = dict(frame_count=frames, height=32, width=32, cell=4,
                    objects=(MoverSpec("disc", 1.5, RED,
                                       ((2.0, 2.0), (5.0, 5.0), (2.0, 5.0))),),
                    seed=9)
    defaults.update(kw)
    return VideoSpec(**defaults)


class TestRunEpisode:
    def test_static_scene_near_perfect(self):
        result = run_episode(static_spec(), PolicyConfig(), ScorerConfig())
        assert result.mean_j >= 0.99
        assert result.mean_f >= 0.99

    def test_unlimited_occupancy_counts_triggers(self):
        policy = PolicyConfig(capacity=None, eviction="unlimited", sigma=0.0,
                              interval=5)
        result = run_episode(static_spec(41), policy, ScorerConfig())
        # every interval boundary passes the (sigma=0) gate
        for t in range(41):
            assert result.occupancy[t] == t // 5 + 1

    def test_occupancy_never_exceeds_capacity(self):
        policy = PolicyConfig(capacity=3, sigma=0.0, interval=2)
        result = run_episode(moving_spec(), policy, ScorerConfig())
        assert result.occupancy.max() <= 3

    def test_corruption_gate_contract(self):
        # a corrupted trigger frame enters memory at sigma=0 and is kept out
        # (deferred) at sigma=0.8
        scorer = ScorerConfig(corruptions=(CorruptionEvent(10, "severe"),))
        lax = run_episode(moving_spec(), PolicyConfig(sigma=0.0), scorer)
        strict = run_episode(moving_spec(), PolicyConfig(sigma=0.8), scorer)
        assert lax.decisions[10] == "admitted"
        assert strict.decisions[10] == "deferred"
        assert strict.decisions[11] == "admitted"

    def test_eviction_modes_identical_below_capacity(self):
        # capacity large enough that eviction never fires: dynamic and
        # fifo_recent produce identical traces
        spec = moving_spec()
        results = {}
        for mode in ("dynamic", "fifo_recent"):
            policy = PolicyConfig(capacity=50, eviction=mode, sigma=0.0)
            results[mode] = run_episode(spec, policy, ScorerConfig())
        np.testing.assert_array_equal(results["dynamic"].frame_j,
                                      results["fifo_recent"].frame_j)
        np.testing.assert_array_equal(results["dynamic"].frame_f,
                                      results["fifo_recent"].frame_f)
        assert results["dynamic"].decisions == results["fifo_recent"].decisions

    def test_determinism(self):
        spec = moving_spec()
        policy = PolicyConfig(prior="weak")
        scorer = ScorerConfig(noise_sigma=0.05)
        a = run_episode(spec, policy, scorer)
        b = run_episode(spec, policy, scorer)
        np.testing.assert_array_equal(a.frame_j, b.frame_j)
        np.testing.assert_array_equal(a.frame_f, b.frame_f)
        np.testing.assert_array_equal(a.occupancy, b.occupancy)
        assert a.decisions == b.decisions
        assert a.evicted == b.evicted

    def test_frame_zero_uses_annotation(self):
        result = run_episode(static_spec(), PolicyConfig(), ScorerConfig())
        assert result.frame_j[0] == 1.0
        assert result.decisions[0] == "admitted"
        assert result.occupancy[0] == 1

    def test_jf_midpoint_invariant(self):
        result = run_episode(moving_spec(), PolicyConfig(), ScorerConfig())
        np.testing.assert_allclose(
            result.frame_jf, (result.frame_j + result.frame_f) / 2,
            atol=1e-15)
        assert abs(result.mean_jf
                   - (result.mean_j + result.mean_f) / 2) <= 1e-12

    def test_raw_sum_falls_back_to_softmax(self):
        # a large position weight makes every row sum negative in raw_sum
        # mode, so each frame degenerates and falls back to softmax
        policy = PolicyConfig(normalize="raw_sum", position_weight=10.0)
        result = run_episode(static_spec(10), policy, ScorerConfig())
        assert result.rawsum_fallbacks == 9
        assert result.mean_j >= 0.99

    def test_raw_sum_without_degeneration_runs(self):
        policy = PolicyConfig(normalize="raw_sum")
        result = run_episode(static_spec(6), policy, ScorerConfig())
        assert len(result.frame_j) == 6

    def test_stride_must_divide_resolution(self):
        with pytest.raises(SpecError):
            run_episode(static_spec(), PolicyConfig(stride=5), ScorerConfig())

    def test_frame_failure_aborts_with_frame_index(self):
        # capacity 1 leaves only the protected annotation: the first due
        # admission cannot evict and the episode aborts naming the frame
        from vosmem.errors import NoEvictableError
        policy = PolicyConfig(capacity=1, sigma=0.0, interval=5)
        with pytest.raises(NoEvictableError, match="frame 5"):
            run_episode(static_spec(), policy, ScorerConfig())

    def test_two_object_scene_segments_both(self):
        spec = VideoSpec(
            frame_count=30, height=64, width=64, cell=4,
            objects=(
                MoverSpec("disc", 2.0, (0.9, 0.15, 0.15),
                          ((4.0, 4.0), (11.0, 4.0))),
                MoverSpec("disc", 2.0, (0.15, 0.2, 0.9),
                          ((4.0, 11.0), (11.0, 11.0))),
            ),
            seed=13)
        result = run_episode(spec, PolicyConfig(), ScorerConfig())
        assert result.mean_j >= 0.95
        assert result.mean_f >= 0.95


class TestMetricsMatchOraclesFramewise:
    def test_episode_scores_equal_brute_force_on_predictions(self):
        # replay the pipeline steps, apply the brute-force metric oracles to
        # the decoded masks, and compare with what run_episode reported
        from vosmem.membank import StackedGrid
        from vosmem.oracles import boundary_f_reference, iou_reference
        from vosmem.quality import OracleScorer, QualityTracker
        from vosmem.readout import memory_read
        from vosmem.synth import generate_video
        from vosmem.features import decode_labels as decode
        from vosmem.metrics import default_tolerance

        spec = moving_spec(frames=25)
        policy = PolicyConfig()
        result = run_episode(spec, policy, ScorerConfig())

        video = generate_video(spec)
        oracle = OracleScorer()
        tracker = QualityTracker()
        bank = policy.make_bank()
        d0 = extract_descriptor(video.frame(0), video.masks(0), policy.stride)
        rep0 = tracker.report(0, oracle.per_object(None, video.masks(0),
                                                   video.masks(0), 0))
        bank.consider_admission(
            rep0, project_key(d0.key, policy.position_weight, "memory"),
            d0.value, 0)
        tol = default_tolerance(*video.resolution)
        for t in range(1, 25):
            image = video.frame(t)
            truth = video.masks(t)
            desc = extract_descriptor(image, None, policy.stride,
                                      object_count=1)
            qk = project_key(desc.key, policy.position_weight, "query")
            mk, mv = bank.snapshot_keys_values()
            read = memory_read(qk, desc.value, mk, mv,
                               scale=policy.similarity_scale)
            predicted = decode(read, 1, policy.stride)
            j_ref = np.mean([iou_reference(p, g) for p, g in
                             zip(predicted.masks, truth.masks)])
            f_ref = np.mean([boundary_f_reference(p, g, tol) for p, g in
                             zip(predicted.masks, truth.masks)])
            assert result.frame_j[t] == j_ref
            assert abs(result.frame_f[t] - f_ref) <= 1e-12
            rep = tracker.report(t, oracle.per_object(None, predicted,
                                                      truth, t))
            if bank.storage_due(t):
                md = extract_descriptor(image, predicted, policy.stride)
                bank.consider_admission(
                    rep, project_key(md.key, policy.position_weight,
                                     "memory"), md.value, t)
            else:
                bank.consider_admission(rep, desc.key, desc.value, t)


class TestProjection:
    def test_projected_dot_ranks_by_distance(self):
        rng = np.random.default_rng(7)
        frame = rng.uniform(0, 1, (16, 16, 3))
        desc = extract_descriptor(frame, None, 4, object_count=1)
        q = project_key(desc.key, 0.5, "query").location_matrix()
        m = project_key(desc.key, 0.5, "memory").location_matrix()
        raw = desc.key.location_matrix().copy()
        raw[:, 3:] *= 0.5
        sims = q @ m.T
        # argmax over memory locations == argmin squared distance
        d2 = ((raw[:, None, :] - raw[None, :, :]) ** 2).sum(axis=2)
        np.testing.assert_array_equal(sims.argmax(axis=1), d2.argmin(axis=1))

    def test_roles_are_validated(self):
        frame = np.zeros((8, 8, 3))
        desc = extract_descriptor(frame, None, 4, object_count=1)
        with pytest.raises(ValueError):
            project_key(desc.key, 0.5, "both")


class TestCorruptMaskSet:
    def grid_mask(self):
        # disc-shaped region like the sweep scenario objects (13 cells)
        from vosmem.core import upsample_nearest
        rr, cc = np.ogrid[:8, :8]
        cells = (rr - 4) ** 2 + (cc - 4) ** 2 <= 4
        mask = upsample_nearest(cells.astype(np.float64), 4, 4)
        return LabeledMaskSet((ObjectMask.from_array(mask),))

    def test_severity_drives_iou_bands(self):
        # mild lands between the 0.4 and 0.8 admission gates, severe below
        masks = self.grid_mask()
        for seed in range(10):
            mild = corrupt_mask_set(masks, "mild", 4, seed)
            severe = corrupt_mask_set(masks, "severe", 4, seed)
            iou_mild = mask_iou(mild.masks[0], masks.masks[0])
            iou_severe = mask_iou(severe.masks[0], masks.masks[0])
            assert 0.4 <= iou_mild < 0.8
            assert iou_severe < 0.4

    def test_deterministic_given_seed(self):
        masks = self.grid_mask()
        a = corrupt_mask_set(masks, "severe", 4, 99)
        b = corrupt_mask_set(masks, "severe", 4, 99)
        np.testing.assert_array_equal(a.masks[0].values, b.masks[0].values)

    def test_unknown_severity(self):
        with pytest.raises(SpecError):
            CorruptionEvent(5, "catastrophic")


class TestSweep:
    def test_axis_overrides(self):
        base = PolicyConfig()
        assert apply_axis(base, "threshold", "0.4").sigma == 0.4
        assert apply_axis(base, "capacity", "7").capacity == 7
        unlimited = apply_axis(base, "capacity", "unlimited")
        assert unlimited.capacity is None
        assert unlimited.eviction == "unlimited"
        assert apply_axis(base, "interval", "3").interval == 3
        with pytest.raises(SpecError):
            apply_axis(base, "gamma", "1")

    def test_sweep_rows_and_determinism(self):
        spec = moving_spec(frames=30)
        rows1 = sweep(spec, "interval", ["3", "5", "7"], PolicyConfig(),
                      ScorerConfig(), seeds=[0, 1])
        rows2 = sweep(spec, "interval", ["3", "5", "7"], PolicyConfig(),
                      ScorerConfig(), seeds=[0, 1])
        assert [r.value for r in rows1] == ["3", "5", "7"]
        assert rows1 == rows2
        assert all(r.seed_count == 2 for r in rows1)

    def test_sweep_parallel_matches_serial(self):
        spec = moving_spec(frames=20)
        serial = sweep(spec, "threshold", ["0.0", "0.8"], PolicyConfig(),
                       ScorerConfig(), seeds=[0, 1], workers=1)
        parallel = sweep(spec, "threshold", ["0.0", "0.8"], PolicyConfig(),
                         ScorerConfig(), seeds=[0, 1], workers=2)
        assert serial == parallel

    def test_empty_inputs_rejected(self):
        spec = moving_spec(frames=20)
        with pytest.raises(SpecError):
            sweep(spec, "threshold", [], PolicyConfig(), ScorerConfig(), [0])
        with pytest.raises(SpecError):
            sweep(spec, "threshold", ["0.5"], PolicyConfig(), ScorerConfig(),
                  [])

    def test_seeded_variant_shifts_all_seeds(self):
        v, p, s = seeded_variant(moving_spec(), PolicyConfig(prior_seed=5),
                                 ScorerConfig(seed=7), 3)
        assert v.seed == moving_spec().seed + 3
        assert p.prior_seed == 8
        assert s.seed == 10
