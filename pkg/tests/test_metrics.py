import numpy as np
import pytest

from vosmem.core import ObjectMask
from vosmem.errors import DimensionError
from vosmem.metrics import (boundary_f, boundary_pixels, default_tolerance,
                            frame_scores)
from vosmem.oracles import (boundary_f_reference, boundary_points_reference,
                            iou_reference)
from vosmem.quality import mask_iou


def mask_of(arr):
    return ObjectMask.from_array(np.asarray(arr, dtype=np.float64))


def square(h, w, r0, r1, c0, c1):
    arr = np.zeros((h, w))
    arr[r0:r1, c0:c1] = 1.0
    return mask_of(arr)


class TestBoundaryExtraction:
    def test_interior_excluded(self):
        m = square(6, 6, 1, 5, 1, 5)
        b = boundary_pixels(m)
        assert b[1, 1] and b[1, 4] and b[4, 4]
        assert not b[2, 2] and not b[3, 3]
        assert b.sum() == 12  # 4x4 block has 12 edge pixels

    def test_frame_border_counts_as_background(self):
        m = mask_of(np.ones((3, 3)))
        b = boundary_pixels(m)
        assert b[0, 0] and b[0, 2] and b[2, 0]
        assert not b[1, 1]

    def test_matches_loop_reference(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = mask_of((rng.random((9, 7)) < 0.45).astype(float))
            fast = {(r, c) for r, c in zip(*np.nonzero(boundary_pixels(m)))}
            assert fast == set(boundary_points_reference(m))


class TestBoundaryF:
    def test_identical_masks(self):
        m = square(8, 8, 2, 6, 2, 6)
        assert boundary_f(m, m, 1) == 1.0

    def test_empty_prediction_nonempty_truth(self):
        assert boundary_f(ObjectMask.empty(8, 8),
                          square(8, 8, 2, 6, 2, 6), 1) == 0.0

    def test_both_empty(self):
        e = ObjectMask.empty(8, 8)
        assert boundary_f(e, e, 1) == 1.0

    def test_shifted_square_matches_oracle(self):
        a = square(8, 8, 1, 5, 1, 5)
        b = square(8, 8, 2, 6, 2, 6)
        assert boundary_f(a, b, 1) == boundary_f_reference(a, b, 1)
        assert 0.0 < boundary_f(a, b, 1) < 1.0

    def test_randomized_oracle_agreement(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            h = int(rng.integers(4, 17))
            w = int(rng.integers(4, 17))
            a = mask_of((rng.random((h, w)) < 0.4).astype(float))
            b = mask_of((rng.random((h, w)) < 0.4).astype(float))
            tol = int(rng.integers(1, 4))
            fast = boundary_f(a, b, tol)
            ref = boundary_f_reference(a, b, tol)
            assert abs(fast - ref) <= 1e-12

    def test_resolution_mismatch(self):
        with pytest.raises(DimensionError):
            boundary_f(ObjectMask.empty(4, 4), ObjectMask.empty(4, 5))

    def test_default_tolerance_rule(self):
        # ceil(0.008 * diagonal), floored at 1 px
        assert default_tolerance(48, 48) == 1
        assert default_tolerance(480, 854) == 8
        assert default_tolerance(4, 4) == 1


class TestFrameScores:
    def test_j_is_mean_iou_and_f_mean_boundary(self):
        from vosmem.core import LabeledMaskSet
        a1 = square(8, 8, 0, 4, 0, 4)
        a2 = square(8, 8, 4, 8, 4, 8)
        b1 = square(8, 8, 0, 4, 0, 4)
        b2 = square(8, 8, 5, 8, 5, 8)
        pred = LabeledMaskSet((a1, a2))
        true = LabeledMaskSet((b1, b2))
        j, f = frame_scores(pred, true, 1)
        expect_j = (mask_iou(a1, b1) + mask_iou(a2, b2)) / 2
        expect_f = (boundary_f(a1, b1, 1) + boundary_f(a2, b2, 1)) / 2
        assert abs(j - expect_j) < 1e-15
        assert abs(f - expect_f) < 1e-15


class TestIouReference:
    def test_reference_agrees_with_fast_path(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            h = int(rng.integers(2, 20))
            w = int(rng.integers(2, 20))
            a = mask_of((rng.random((h, w)) < 0.35).astype(float))
            b = mask_of((rng.random((h, w)) < 0.35).astype(float))
            assert mask_iou(a, b) == iou_reference(a, b)
