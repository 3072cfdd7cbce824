"""Tests for grid decoding, class scores, NMS and finalize."""

import numpy as np
import pytest

from bengali_math_solver.model import NUM_CLASSES, Box, Detection, iou
from bengali_math_solver.postprocess import (
    CellPrediction,
    GridSpec,
    class_scores,
    decode_cell,
    finalize,
    nms,
)


def _cell(row=0, col=0, rel=(0.5, 0.5), dims=(0.1, 0.1), objectness=1.0, probs=None, **kw):
    if probs is None:
        probs = [0.0] * NUM_CLASSES
        probs[0] = 1.0
    return CellPrediction(row, col, rel[0], rel[1], dims[0], dims[1], objectness, tuple(probs), **kw)


def _random_cell(rng, size):
    probs = rng.dirichlet(np.ones(NUM_CLASSES))
    return CellPrediction(
        row=int(rng.integers(size)),
        col=int(rng.integers(size)),
        rel_x=float(rng.random()),
        rel_y=float(rng.random()),
        norm_w=float(rng.uniform(0.02, 0.3)),
        norm_h=float(rng.uniform(0.02, 0.3)),
        objectness=float(rng.random()),
        class_probs=tuple(float(p) for p in probs),
    )


class TestDecodeCell:
    """Tests for decode_cell."""

    def test_first_cell(self):
        box = decode_cell(_cell(), GridSpec(19))
        assert box.x_center == pytest.approx(0.5 / 19)
        assert box.y_center == pytest.approx(0.5 / 19)
        assert (box.width, box.height) == (0.1, 0.1)

    def test_single_cell_grid(self):
        box = decode_cell(_cell(), GridSpec(1))
        assert (box.x_center, box.y_center) == (0.5, 0.5)

    def test_last_cell_boundary(self):
        box = decode_cell(_cell(row=37, col=37, rel=(1.0, 1.0)), GridSpec(38))
        assert (box.x_center, box.y_center) == pytest.approx((1.0, 1.0))

    def test_column_is_x(self):
        box = decode_cell(_cell(row=0, col=2, rel=(0.0, 0.0)), GridSpec(4))
        assert (box.x_center, box.y_center) == (0.5, 0.0)

    def test_cell_outside_grid(self):
        with pytest.raises(ValueError, match="outside"):
            decode_cell(_cell(row=19), GridSpec(19))

    def test_per_cell_grid_override(self):
        box = decode_cell(_cell(row=37, col=0, grid=38), GridSpec(19))
        assert box.y_center == pytest.approx(37.5 / 38)

    def test_box_index_checked(self):
        with pytest.raises(ValueError, match="box index"):
            decode_cell(_cell(box_index=3), GridSpec(19, boxes_per_cell=3))


class TestCellPrediction:
    """Tests for CellPrediction validation."""

    def test_wrong_probability_count(self):
        with pytest.raises(ValueError, match="18 class probabilities"):
            _cell(probs=[0.5, 0.5])

    def test_dict_round_trip(self):
        cell = _cell(grid=76, box_index=2)
        assert CellPrediction.from_dict(cell.to_dict()) == cell


class TestClassScores:
    """Tests for class_scores."""

    def test_zero_objectness(self):
        assert class_scores(_cell(objectness=0.0)) == (0.0,) * NUM_CLASSES

    def test_uniform_probabilities(self):
        scores = class_scores(_cell(objectness=0.9, probs=[1 / 18] * NUM_CLASSES))
        assert scores == pytest.approx([0.05] * NUM_CLASSES)

    def test_single_class(self):
        probs = [0.0] * NUM_CLASSES
        probs[3] = 0.9
        assert class_scores(_cell(objectness=0.8, probs=probs))[3] == pytest.approx(0.72)

    def test_sum_equals_objectness(self):
        """Scores over a normalized distribution sum to the objectness."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            cell = _random_cell(rng, 19)
            assert sum(class_scores(cell)) == pytest.approx(cell.objectness, abs=1e-9)


class TestNms:
    """Tests for nms."""

    def test_overlapping_same_class(self):
        strong = Detection(1, Box(0.5, 0.5, 0.2, 0.2), 0.9)
        weak = Detection(1, Box(0.505, 0.5, 0.2, 0.2), 0.8)
        assert iou(strong.box, weak.box) > 0.9
        assert nms([weak, strong], 0.45) == [strong]

    def test_disjoint_boxes_survive(self):
        a = Detection(1, Box(0.2, 0.2, 0.1, 0.1), 0.9)
        b = Detection(1, Box(0.8, 0.8, 0.1, 0.1), 0.8)
        assert nms([a, b], 0.45) == [a, b]

    def test_different_classes_survive(self):
        a = Detection(1, Box(0.5, 0.5, 0.2, 0.2), 0.9)
        b = Detection(14, Box(0.505, 0.5, 0.2, 0.2), 0.8)
        assert nms([b, a], 0.45) == [a, b]

    def test_empty(self):
        assert nms([], 0.45) == []

    def test_kept_boxes_do_not_overlap(self):
        rng = np.random.default_rng(1)
        cells = [_random_cell(rng, 4) for _ in range(100)]
        dets = [Detection(0, decode_cell(c, GridSpec(4)), c.objectness) for c in cells]
        kept = nms(dets, 0.45)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                assert iou(a.box, b.box) <= 0.45

    def test_matches_pairwise_greedy(self):
        """Same survivors as a greedy loop over the scalar iou."""
        rng = np.random.default_rng(3)
        for _ in range(20):
            cells = [_random_cell(rng, 4) for _ in range(40)]
            dets = [Detection(int(rng.integers(3)), decode_cell(c, GridSpec(4)), c.objectness) for c in cells]
            expected = []
            for det in sorted(dets, key=lambda d: (-d.confidence, d.class_id, d.box.x_center,
                                                   d.box.y_center, d.box.width, d.box.height)):
                if all(k.class_id != det.class_id or iou(k.box, det.box) <= 0.45 for k in expected):
                    expected.append(det)
            assert nms(dets, 0.45) == expected

    def test_idempotent_and_order_invariant(self):
        rng = np.random.default_rng(2)
        cells = [_random_cell(rng, 4) for _ in range(60)]
        dets = [Detection(int(rng.integers(3)), decode_cell(c, GridSpec(4)), c.objectness) for c in cells]
        kept = nms(dets, 0.45)
        assert nms(kept, 0.45) == kept
        shuffled = [dets[i] for i in rng.permutation(len(dets))]
        assert nms(shuffled, 0.45) == kept


class TestFinalize:
    """Tests for finalize."""

    def test_empty(self):
        assert finalize([], GridSpec(19)) == []

    def test_single_cell_above_threshold(self):
        probs = [0.0] * NUM_CLASSES
        probs[5] = 0.6
        [det] = finalize([_cell(objectness=0.5, probs=probs)], GridSpec(19), 0.25, 0.45)
        assert det.class_id == 5
        assert det.confidence == pytest.approx(0.3)

    def test_below_threshold_dropped(self):
        probs = [0.0] * NUM_CLASSES
        probs[5] = 0.4
        assert finalize([_cell(objectness=0.5, probs=probs)], GridSpec(19), 0.25, 0.45) == []

    def test_output_properties(self):
        """Every output clears the threshold and no same-class pair overlaps."""
        rng = np.random.default_rng(4)
        cells = [_random_cell(rng, 19) for _ in range(100)]
        dets = finalize(cells, GridSpec(19), 0.05, 0.45)
        assert all(d.confidence >= 0.05 for d in dets)
        for i, a in enumerate(dets):
            for b in dets[i + 1:]:
                if a.class_id == b.class_id:
                    assert iou(a.box, b.box) <= 0.45
        assert dets == finalize(list(reversed(cells)), GridSpec(19), 0.05, 0.45)
