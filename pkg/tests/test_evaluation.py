"""Matching, average precision (against a brute-force oracle), per-bin mAP
and point-set repeatability."""

from __future__ import annotations

import random

import pytest

from sensorbias.evaluation import (
    Annotation,
    Box,
    Detection,
    DetectionSet,
    GroundTruthSet,
    PrPoint,
    average_precision,
    iou,
    match_detections,
    mean_average_precision,
    per_bin_map,
    repeatability_pr,
    threshold_pr,
)
from sensorbias.exceptions import NoPositives
from sensorbias.exif import ExifRecord


def ap_oracle(labeled: list[tuple[float, bool]], n_positive: int) -> float:
    """Brute-force 101-point interpolated AP.

    Scans every operating point for each recall threshold instead of using
    an envelope; written independently of the implementation under test.
    """
    ordered = sorted(labeled, key=lambda pair: -pair[0])
    points = []
    tp = fp = 0
    for _, is_tp in ordered:
        if is_tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_positive, tp / (tp + fp)))
    total = 0.0
    for k in range(101):
        threshold = k / 100
        best = 0.0
        for recall, precision in points:
            if recall >= threshold and precision > best:
                best = precision
        total += best
    return total / 101


def random_labeled_set(rng: random.Random) -> tuple[list[tuple[float, bool]], int]:
    """Random realizable (score, is_tp) set: TPs never exceed positives."""
    n_positive = rng.randint(1, 5)
    n_dets = rng.randint(0, 10)
    labeled = []
    tp_budget = n_positive
    for _ in range(n_dets):
        # coarse scores force ties regularly
        score = rng.choice([0.1, 0.25, 0.5, 0.5, 0.75, 0.9, rng.random()])
        is_tp = rng.random() < 0.5 and tp_budget > 0
        if is_tp:
            tp_budget -= 1
        labeled.append((score, is_tp))
    return labeled, n_positive


class TestIou:
    def test_identical_boxes(self):
        box = Box(3, 4, 10, 12)
        assert iou(box, box) == 1.0

    def test_half_offset(self):
        assert iou(Box(0, 0, 10, 10), Box(5, 0, 10, 10)) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 1, 1)) == 0.0

    def test_touching_edges_are_disjoint(self):
        assert iou(Box(0, 0, 5, 5), Box(5, 0, 5, 5)) == 0.0

    def test_symmetry_and_range_random(self):
        rng = random.Random(12)
        for _ in range(500):
            a = Box(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 10), rng.uniform(0.1, 10))
            b = Box(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 10), rng.uniform(0.1, 10))
            ab = iou(a, b)
            assert ab == iou(b, a)
            assert 0.0 <= ab <= 1.0

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            Box(0, 0, 0, 5)


class TestMatchDetections:
    def test_single_match(self):
        result = match_detections([(Box(0, 0, 10, 10), 0.9)], [Box(1, 1, 10, 10)], 0.5)
        assert result.detection_is_tp == [True]
        assert result.gt_matched == [True]

    def test_score_order_beats_iou_order(self):
        # the higher-scoring detection claims the lone GT despite lower IoU
        gt = [Box(0, 0, 10, 10)]
        det_a = (Box(0, 3.5, 10, 10), 0.9)   # IoU ~ 0.48? -> compute: overlap 10x6.5=65, union 135 -> 0.481 < .5, adjust
        det_b = (Box(0, 0.2, 10, 10), 0.8)   # IoU ~ 0.96
        # use overlaps .55 and .95 instead
        det_a = (Box(0, 2.8, 10, 10), 0.9)   # overlap 72/128 = 0.5625
        det_b = (Box(0, 0.2, 10, 10), 0.8)   # overlap 98/102 = 0.9608
        result = match_detections([det_a, det_b], gt, 0.5)
        assert result.detection_is_tp == [True, False]

    def test_detection_takes_highest_iou_gt(self):
        gts = [Box(0, 0, 10, 10), Box(20, 0, 10, 10)]
        det = (Box(1.5, 0, 10, 10), 0.9)  # IoU 0.739 with gt0, 0 with gt1
        far = (Box(18, 0, 10, 10), 0.8)
        result = match_detections([det, far], gts, 0.5)
        assert result.gt_matched == [True, True]

    def test_prefers_larger_overlap_among_candidates(self):
        gts = [Box(0, 0, 10, 12), Box(0, 0, 12, 10)]
        det = (Box(0, 0, 10, 11), 0.9)
        first = iou(det[0], gts[0])
        second = iou(det[0], gts[1])
        assert first > second >= 0.5
        result = match_detections([det], gts, 0.5)
        assert result.gt_matched == [True, False]

    def test_each_gt_used_once(self):
        gt = [Box(0, 0, 10, 10)]
        dets = [(Box(0, 0, 10, 10), 0.9), (Box(0, 1, 10, 10), 0.8)]
        result = match_detections(dets, gt, 0.5)
        assert result.detection_is_tp == [True, False]

    def test_below_threshold_is_fp(self):
        result = match_detections([(Box(0, 0, 10, 10), 0.9)], [Box(8, 8, 10, 10)], 0.5)
        assert result.detection_is_tp == [False]
        assert result.gt_matched == [False]


class TestAveragePrecision:
    def test_perfect_single_detection(self):
        assert average_precision([(0.9, True)], 1) == 1.0

    def test_hand_case_tp_then_fp_two_gt(self):
        # frozen by hand: p(r)=1 for r<=0.5, 0 above -> 51/101
        assert average_precision([(0.9, True), (0.8, False)], 2) == pytest.approx(
            51 / 101, abs=1e-15
        )

    def test_fp_then_tp_cases_match_oracle(self):
        # 1 GT: the TP at rank 2 gives precision 0.5 at recall 1.0, so the
        # interpolated precision is 0.5 across the whole recall axis.
        labeled = [(0.9, False), (0.8, True)]
        assert average_precision(labeled, 1) == pytest.approx(ap_oracle(labeled, 1), abs=1e-15)
        assert average_precision(labeled, 1) == 0.5
        # 2 GT variant: recall tops out at 0.5 -> 51 points of 0.5
        assert average_precision(labeled, 2) == pytest.approx(51 / 101 * 0.5, abs=1e-15)

    def test_no_detections_zero_ap(self):
        assert average_precision([], 3) == 0.0

    def test_no_positives_rejected(self):
        with pytest.raises(NoPositives):
            average_precision([(0.9, True)], 0)

    def test_matches_oracle_on_random_sets(self):
        rng = random.Random(13)
        for _ in range(300):
            labeled, n_positive = random_labeled_set(rng)
            assert average_precision(labeled, n_positive) == pytest.approx(
                ap_oracle(labeled, n_positive), abs=1e-12
            )

    def test_ap_bounds_and_perfection(self):
        rng = random.Random(14)
        for _ in range(100):
            labeled, n_positive = random_labeled_set(rng)
            ap = average_precision(labeled, n_positive)
            assert 0.0 <= ap <= 1.0
        # AP = 1 iff all GT matched before any FP at higher score
        perfect = [(0.9, True), (0.8, True), (0.1, False)]
        assert average_precision(perfect, 2) == 1.0

    def test_appending_lowest_score_fp_never_increases_ap(self):
        rng = random.Random(15)
        for _ in range(100):
            labeled, n_positive = random_labeled_set(rng)
            base = average_precision(labeled, n_positive)
            lowest = min((s for s, _ in labeled), default=1.0)
            extended = labeled + [(lowest / 2, False)]
            assert average_precision(extended, n_positive) <= base + 1e-15

    def test_order_permutation_invariance_without_ties(self):
        rng = random.Random(16)
        scores = rng.sample(range(1000), 10)
        labeled = [(s / 1000, rng.random() < 0.5) for s in scores]
        n_positive = max(1, sum(1 for _, tp in labeled if tp))
        base = average_precision(labeled, n_positive)
        for _ in range(10):
            shuffled = labeled[:]
            rng.shuffle(shuffled)
            assert average_precision(shuffled, n_positive) == base


def one_box_corpus() -> tuple[DetectionSet, GroundTruthSet]:
    gt = GroundTruthSet({
        "a": [Annotation(1, Box(0, 0, 10, 10))],
        "b": [Annotation(1, Box(0, 0, 10, 10)), Annotation(2, Box(20, 20, 5, 5))],
    })
    dets = DetectionSet({
        "a": [Detection(1, Box(0, 0, 10, 10), 0.9)],
        "b": [Detection(1, Box(1, 1, 10, 10), 0.8), Detection(2, Box(20, 20, 5, 5), 0.7)],
    })
    return dets, gt


class TestMeanAveragePrecision:
    def test_all_matched(self):
        dets, gt = one_box_corpus()
        assert mean_average_precision(dets, gt, 0.5) == 1.0

    def test_no_categories_returns_none(self):
        assert mean_average_precision(DetectionSet(), GroundTruthSet({"a": []}), 0.5) is None

    def test_detections_on_gt_free_images_count_as_fp(self):
        gt = GroundTruthSet({"a": [Annotation(1, Box(0, 0, 10, 10))], "b": []})
        dets = DetectionSet({
            "a": [Detection(1, Box(0, 0, 10, 10), 0.8)],
            "b": [Detection(1, Box(0, 0, 10, 10), 0.9)],  # stray, higher score
        })
        # FP at rank 1, TP at rank 2 -> interpolated precision 0.5 everywhere
        assert mean_average_precision(dets, gt, 0.5) == 0.5


def exif_index(**kwargs: tuple[float, int]) -> dict[str, ExifRecord]:
    return {
        image_id: ExifRecord(image_id, exposure_time_s=t, f_number=4.0, iso=iso)
        for image_id, (t, iso) in kwargs.items()
    }


class TestPerBinMap:
    def test_single_cell_equals_global_map(self):
        dets, gt = one_box_corpus()
        index = exif_index(a=(0.01, 150), b=(0.02, 180))
        grid = per_bin_map(dets, gt, index, 0.5)
        assert grid.cells[0][1] == mean_average_precision(dets, gt, 0.5)
        assert grid.image_counts[0][1] == 2
        assert grid.annotation_counts[0][1] == 3
        assert all(
            grid.cells[r][c] is None
            for r in range(8) for c in range(8) if (r, c) != (0, 1)
        )

    def test_two_cells_disjoint_categories(self):
        gt = GroundTruthSet({
            "a": [Annotation(1, Box(0, 0, 10, 10))],
            "b": [Annotation(2, Box(0, 0, 10, 10))],
        })
        dets = DetectionSet({
            "a": [Detection(1, Box(0, 0, 10, 10), 0.9)],       # TP for cat 1
            "b": [Detection(2, Box(100, 100, 5, 5), 0.8),       # FP for cat 2
                  Detection(2, Box(0, 0, 10, 10), 0.6)],        # TP for cat 2
        })
        index = exif_index(a=(0.01, 150), b=(0.3, 900))
        grid = per_bin_map(dets, gt, index, 0.5)
        # cell (0,1): cat 1 only, perfect -> 1.0
        assert grid.cells[0][1] == 1.0
        # cell (2,4): cat 2 only, FP first then TP -> 0.5 everywhere
        assert grid.cells[2][4] == 0.5

    def test_images_without_usable_exif_are_excluded_and_counted(self):
        dets, gt = one_box_corpus()
        index = exif_index(a=(0.01, 150))  # "b" missing entirely
        grid = per_bin_map(dets, gt, index, 0.5)
        assert grid.excluded_image_count == 1
        assert grid.cells[0][1] == 1.0

    def test_cell_with_images_but_no_gt_stays_undefined(self):
        gt = GroundTruthSet({"a": [Annotation(1, Box(0, 0, 10, 10))], "c": []})
        dets = DetectionSet({"a": [Detection(1, Box(0, 0, 10, 10), 0.9)]})
        index = exif_index(a=(0.01, 150), c=(0.9, 5000))
        grid = per_bin_map(dets, gt, index, 0.5)
        assert grid.cells[7][6] is None
        assert grid.image_counts[7][6] == 1
        assert grid.annotation_counts[7][6] == 0

    def test_clamped_iso_counted(self):
        gt = GroundTruthSet({"a": [Annotation(1, Box(0, 0, 10, 10))]})
        dets = DetectionSet()
        grid = per_bin_map(dets, gt, exif_index(a=(0.01, 20000)), 0.5)
        assert grid.clamped_iso_count == 1
        assert grid.cells[0][7] == 0.0  # GT present, no detections


class TestRepeatability:
    def test_identical_sets(self):
        points = [(0.0, 0.0), (10.0, 10.0), (3.0, 7.0)]
        result = repeatability_pr(points, points, 2.0)
        assert result == PrPoint(1.0, 1.0)

    def test_partial_recall(self):
        result = repeatability_pr([(0, 0), (10, 10)], [(0, 1)], 2.0)
        assert result.precision == 1.0
        assert result.recall == 0.5

    def test_stray_test_point(self):
        result = repeatability_pr([(0, 0)], [(0, 0), (50, 50)], 2.0)
        assert result.precision == 0.5
        assert result.recall == 1.0

    def test_one_to_one_matching(self):
        # two test points near one target: only one may match
        result = repeatability_pr([(0, 0)], [(0, 1), (1, 0)], 5.0)
        assert result.precision == 0.5
        assert result.recall == 1.0

    def test_greedy_prefers_closest_pair(self):
        # target t0 is closest to s1; greedy must pair (t0, s1), leaving s0 to t1
        target = [(0.0, 0.0), (4.0, 0.0)]
        test = [(3.0, 0.0), (0.5, 0.0)]
        result = repeatability_pr(target, test, 5.0)
        assert result.precision == 1.0
        assert result.recall == 1.0

    def test_empty_test_leaves_precision_undefined(self):
        result = repeatability_pr([(0, 0)], [], 2.0)
        assert result.precision is None
        assert result.recall == 0.0

    def test_empty_target_leaves_recall_undefined(self):
        result = repeatability_pr([], [(0, 0)], 2.0)
        assert result.precision == 0.0
        assert result.recall is None

    def test_identity_for_any_tolerance(self):
        rng = random.Random(17)
        for _ in range(20):
            points = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(8)]
            tolerance = rng.uniform(1e-6, 50)
            assert repeatability_pr(points, points, tolerance) == PrPoint(1.0, 1.0)

    def test_non_positive_tolerance_rejected(self):
        with pytest.raises(ValueError):
            repeatability_pr([(0, 0)], [(0, 0)], 0.0)


class TestThresholdPr:
    def test_lifts_low_component(self):
        assert threshold_pr(PrPoint(0.2, 0.9), 0.5) == PrPoint(0.5, 0.9)

    def test_leaves_high_components(self):
        assert threshold_pr(PrPoint(0.7, 0.6), 0.5) == PrPoint(0.7, 0.6)

    def test_fixed_point(self):
        assert threshold_pr(PrPoint(0.5, 0.5), 0.5) == PrPoint(0.5, 0.5)

    def test_undefined_components_stay_undefined(self):
        assert threshold_pr(PrPoint(None, 0.2), 0.5) == PrPoint(None, 0.5)

    def test_bad_floor_rejected(self):
        with pytest.raises(ValueError):
            threshold_pr(PrPoint(0.5, 0.5), 1.5)
