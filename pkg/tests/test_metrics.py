import numpy as np
import pytest

from scenegnn.geometry import BoundingBox
from scenegnn.metrics import (
    Detection,
    label_metrics,
    map50,
    validity_accuracy,
)
from scenegnn.scenegraph import Frame, SceneObject


def box(x0, y0, x1, y1):
    return BoundingBox(x0, y0, x1, y1)


class TestValidityAccuracy:
    def test_all_correct(self):
        assert validity_accuracy([True, False, True], [True, False, True]) == 1.0

    def test_all_wrong(self):
        assert validity_accuracy([True, True], [False, False]) == 0.0

    def test_three_of_four(self):
        assert validity_accuracy(
            [True, True, False, False], [True, True, False, True]
        ) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            validity_accuracy([], [])


class TestLabelMetrics:
    def test_perfect_predictions(self):
        labels = np.array([0, 1, 2, 1])
        m = label_metrics(labels, labels, np.ones(4, dtype=bool), 3)
        assert m.accuracy == m.weighted_precision == m.weighted_recall == m.weighted_f1 == 1.0
        assert np.array_equal(np.diag(np.diag(m.confusion)), m.confusion)

    def test_hand_weighted_f1(self):
        # class 0: support 3, perfect (F1 1.0); class 1: support 1, always
        # predicted as class 2 (F1 0.0) -> weighted F1 = 3/4
        gt = np.array([0, 0, 0, 1])
        pred = np.array([0, 0, 0, 2])
        m = label_metrics(pred, gt, np.ones(4, dtype=bool), 3)
        assert m.weighted_f1 == pytest.approx(0.75)

    def test_single_correct_node(self):
        m = label_metrics(np.array([2]), np.array([2]), np.array([True]), 4)
        assert m.accuracy == 1.0
        assert m.confusion[2, 2] == 1 and m.confusion.sum() == 1

    def test_empty_mask_flagged_not_nan(self):
        m = label_metrics(np.array([0, 1]), np.array([0, 1]), np.zeros(2, dtype=bool), 3)
        assert m.no_invalid_nodes
        assert m.n_evaluated == 0
        assert np.isfinite([m.accuracy, m.weighted_f1]).all()

    def test_mask_restricts_evaluation(self):
        gt = np.array([0, 1, 2])
        pred = np.array([0, 0, 0])  # wrong on 1 and 2 but only node 0 masked
        m = label_metrics(pred, gt, np.array([True, False, False]), 3)
        assert m.accuracy == 1.0 and m.n_evaluated == 1

    def test_confusion_row_sums_equal_support(self):
        rng = np.random.default_rng(0)
        gt = rng.integers(0, 5, 200)
        pred = rng.integers(0, 5, 200)
        mask = rng.random(200) < 0.6
        m = label_metrics(pred, gt, mask, 5)
        assert int(m.confusion.sum()) == int(mask.sum())
        for c in range(5):
            assert m.confusion[c].sum() == int((gt[mask] == c).sum())

    def test_weighted_f1_matches_direct_per_class(self):
        rng = np.random.default_rng(1)
        gt = rng.integers(0, 4, 300)
        pred = rng.integers(0, 4, 300)
        mask = np.ones(300, dtype=bool)
        m = label_metrics(pred, gt, mask, 4)
        # direct per-class recomputation
        f1s, weights = [], []
        for c in range(4):
            tp = np.sum((pred == c) & (gt == c))
            fp = np.sum((pred == c) & (gt != c))
            fn = np.sum((pred != c) & (gt == c))
            prec = tp / (tp + fp) if tp + fp else 0.0
            rec = tp / (tp + fn) if tp + fn else 0.0
            f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
            weights.append((gt == c).sum())
        expected = np.average(f1s, weights=weights)
        assert m.weighted_f1 == pytest.approx(expected, abs=1e-12)

    def test_zero_support_classes_reported(self):
        m = label_metrics(np.array([0, 0]), np.array([0, 0]), np.ones(2, dtype=bool), 3)
        assert m.zero_support_classes == [1, 2]


def gt_frame(frame_id, *objs):
    return Frame(frame_id, tuple(SceneObject(c, b) for c, b in objs))


class TestMap50:
    def test_perfect_detector(self):
        frames = [
            gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3)), (1, box(0.5, 0.5, 0.8, 0.8))),
            gt_frame("b", (0, box(0.2, 0.2, 0.4, 0.4))),
        ]
        dets = [
            Detection(f.frame_id, o.label_id, o.bbox, 1.0)
            for f in frames
            for o in f.objects
        ]
        per_class, mean_ap = map50(dets, frames)
        assert mean_ap == 1.0
        assert per_class == {0: 1.0, 1: 1.0}

    def test_all_wrong_class(self):
        frames = [gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3)))]
        dets = [Detection("a", 1, box(0.1, 0.1, 0.3, 0.3), 0.9)]
        _, mean_ap = map50(dets, frames)
        assert mean_ap == 0.0

    def test_hand_walked_pr_curve(self):
        # one class, 2 GT boxes, detections ranked [TP, FP, TP]:
        # precision at recall 0.5 is 1.0, at recall 1.0 is 2/3
        # all-point AP = 0.5*1.0 + 0.5*(2/3) = 5/6
        frames = [
            gt_frame(
                "a", (0, box(0.1, 0.1, 0.3, 0.3)), (0, box(0.6, 0.6, 0.9, 0.9))
            )
        ]
        dets = [
            Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.9),  # TP
            Detection("a", 0, box(0.4, 0.05, 0.55, 0.2), 0.8),  # FP, no overlap
            Detection("a", 0, box(0.6, 0.6, 0.9, 0.9), 0.7),  # TP
        ]
        per_class, mean_ap = map50(dets, frames)
        assert per_class[0] == pytest.approx(5 / 6, abs=1e-9)
        assert mean_ap == pytest.approx(5 / 6, abs=1e-9)

    def test_duplicate_detection_becomes_fp(self):
        frames = [gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3)))]
        base = [Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.9)]
        dup = base + [Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.8)]
        _, ap_base = map50(base, frames)
        _, ap_dup = map50(dup, frames)
        assert ap_dup <= ap_base

    def test_iou_below_half_is_fp(self):
        frames = [gt_frame("a", (0, box(0.0, 0.0, 0.2, 0.2)))]
        dets = [Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.9)]  # IoU = 1/7
        _, mean_ap = map50(dets, frames)
        assert mean_ap == 0.0

    def test_unknown_frame_rejected(self):
        frames = [gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3)))]
        dets = [Detection("zzz", 0, box(0.1, 0.1, 0.3, 0.3), 0.9)]
        with pytest.raises(ValueError):
            map50(dets, frames)

    def test_equal_confidence_order_invariance(self):
        frames = [
            gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3))),
            gt_frame("b", (0, box(0.5, 0.5, 0.7, 0.7))),
        ]
        d1 = Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.8)
        d2 = Detection("b", 0, box(0.0, 0.0, 0.1, 0.1), 0.8)
        _, ap_fwd = map50([d1, d2], frames)
        _, ap_rev = map50([d2, d1], frames)
        assert ap_fwd == ap_rev

    def test_class_absent_from_gt_excluded(self):
        frames = [gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3)))]
        dets = [
            Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.9),
            Detection("a", 7, box(0.5, 0.5, 0.7, 0.7), 0.9),  # class 7 not in GT
        ]
        per_class, mean_ap = map50(dets, frames)
        assert 7 not in per_class
        assert mean_ap == 1.0

    def test_missed_gt_box_lowers_recall(self):
        frames = [
            gt_frame("a", (0, box(0.1, 0.1, 0.3, 0.3)), (0, box(0.6, 0.6, 0.9, 0.9)))
        ]
        dets = [Detection("a", 0, box(0.1, 0.1, 0.3, 0.3), 0.9)]
        per_class, _ = map50(dets, frames)
        assert per_class[0] == pytest.approx(0.5)

    def test_confidence_range_enforced(self):
        with pytest.raises(ValueError):
            Detection("a", 0, box(0, 0, 0.1, 0.1), 1.5)
