"""Detection scoring conditioned on sensor bins.

Implements IoU box matching with greedy score-ordered assignment, 101-point
interpolated average precision at a single IoU threshold (0.5 by default,
max 100 detections per image enforced at ingest), per-bin mAP grids over
the 8x8 exposure/ISO partition, and point-set precision/recall for
interest-point repeatability scoring.

Cells without any ground-truth annotation have an undefined mAP (None),
never 0 -- averaging in zeros would fabricate structure that is not there.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .binning import GRID_SIZE, ISO_CLAMP_THRESHOLD, grid_index
from .exceptions import NoPositives
from .exif import ExifRecord

RECALL_POINTS = 101  # recall thresholds 0.00, 0.01, ..., 1.00
DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_MAX_DETECTIONS = 100
DEFAULT_POINT_TOLERANCE_PX = 5.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in pixels, top-left origin, positive extent."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extent must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Annotation:
    category_id: int
    box: Box


@dataclass(frozen=True)
class Detection:
    category_id: int
    box: Box
    score: float


@dataclass
class GroundTruthSet:
    """Category-labeled boxes keyed by image id (empty lists are meaningful:
    such images still host false positives)."""

    by_image: dict[str, list[Annotation]] = field(default_factory=dict)

    def total_annotations(self) -> int:
        return sum(len(v) for v in self.by_image.values())

    def category_ids(self, image_ids: Iterable[str] | None = None) -> list[int]:
        images = self.by_image.keys() if image_ids is None else image_ids
        found = {
            a.category_id for img in images for a in self.by_image.get(img, ())
        }
        return sorted(found)


@dataclass
class DetectionSet:
    """Scored detections keyed by image id, truncated to max_dets at ingest."""

    by_image: dict[str, list[Detection]] = field(default_factory=dict)

    def total_detections(self) -> int:
        return sum(len(v) for v in self.by_image.values())


@dataclass(frozen=True)
class PrPoint:
    """Precision/recall pair; a component is None when undefined (empty
    test set leaves precision undefined, empty target set leaves recall
    undefined)."""

    precision: float | None
    recall: float | None

    def __post_init__(self) -> None:
        for name, value in (("precision", self.precision), ("recall", self.recall)):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass
class MatchResult:
    """Per-detection TP labels (input order) and per-GT matched flags."""

    detection_is_tp: list[bool]
    gt_matched: list[bool]


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    if ix <= 0:
        return 0.0
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iy <= 0:
        return 0.0
    intersection = ix * iy
    return intersection / (a.area + b.area - intersection)


def match_detections(
    detections: Sequence[tuple[Box, float]],
    ground_truths: Sequence[Box],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchResult:
    """Greedy score-ordered matching within one (image, category) group.

    Detections are processed in descending score (ties by insertion order);
    each takes the still-unmatched ground truth with the highest IoU, if
    that IoU reaches the threshold. Every ground truth matches at most once;
    detections left unmatched are false positives.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i][1])
    is_tp = [False] * len(detections)
    matched = [False] * len(ground_truths)
    for det_index in order:
        box = detections[det_index][0]
        best_iou = -1.0
        best_gt = -1
        for gt_index, gt_box in enumerate(ground_truths):
            if matched[gt_index]:
                continue
            overlap = iou(box, gt_box)
            if overlap > best_iou:  # IoU ties keep the earlier ground truth
                best_iou = overlap
                best_gt = gt_index
        if best_gt >= 0 and best_iou >= iou_threshold:
            is_tp[det_index] = True
            matched[best_gt] = True
    return MatchResult(is_tp, matched)


def average_precision(
    labeled_detections: Iterable[tuple[float, bool]], n_positive: int
) -> float:
    """101-point interpolated average precision.

    ``labeled_detections`` are (score, is_true_positive) pairs pooled across
    images; ``n_positive`` is the ground-truth count. The interpolated
    precision at recall r is the maximum precision among operating points
    with recall >= r; AP averages it over r in {0.00, 0.01, ..., 1.00}.
    """
    if n_positive < 1:
        raise NoPositives("average precision needs at least one ground truth")
    ordered = sorted(labeled_detections, key=lambda pair: -pair[0])
    recalls: list[float] = []
    precisions: list[float] = []
    tp = 0
    for rank, (_, is_tp) in enumerate(ordered, start=1):
        if is_tp:
            tp += 1
        recalls.append(tp / n_positive)
        precisions.append(tp / rank)
    # envelope: precision at each point becomes the max to its right
    for i in range(len(precisions) - 2, -1, -1):
        if precisions[i + 1] > precisions[i]:
            precisions[i] = precisions[i + 1]
    total = 0.0
    n = len(recalls)
    for k in range(RECALL_POINTS):
        idx = bisect_left(recalls, k / 100)
        if idx < n:
            total += precisions[idx]
    return total / RECALL_POINTS


def mean_average_precision(
    detections: DetectionSet,
    ground_truth: GroundTruthSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    image_ids: Sequence[str] | None = None,
) -> float | None:
    """mAP over the categories that have ground truth in the image subset.

    Returns None when no category has any ground truth there. Detections on
    images without ground truth for a category still count as its false
    positives, as long as those images belong to the subset.
    """
    images = list(ground_truth.by_image) if image_ids is None else list(image_ids)
    categories = ground_truth.category_ids(images)
    if not categories:
        return None
    ap_values = []
    for category in categories:
        labeled: list[tuple[float, bool]] = []
        n_positive = 0
        for image_id in images:
            gt_boxes = [
                a.box
                for a in ground_truth.by_image.get(image_id, ())
                if a.category_id == category
            ]
            dets = [
                (d.box, d.score)
                for d in detections.by_image.get(image_id, ())
                if d.category_id == category
            ]
            n_positive += len(gt_boxes)
            if dets:
                result = match_detections(dets, gt_boxes, iou_threshold)
                labeled.extend(
                    (score, is_tp)
                    for (_, score), is_tp in zip(dets, result.detection_is_tp)
                )
        ap_values.append(average_precision(labeled, n_positive))
    return sum(ap_values) / len(ap_values)


def _empty_int_grid() -> list[list[int]]:
    return [[0] * GRID_SIZE for _ in range(GRID_SIZE)]


@dataclass
class BinScoreGrid:
    """Per-cell mAP over the 8x8 sensor grid.

    A cell is defined (non-None) iff its image set contains at least one
    ground-truth annotation; image and annotation counts are reported for
    every cell regardless.
    """

    cells: list[list[float | None]] = field(
        default_factory=lambda: [[None] * GRID_SIZE for _ in range(GRID_SIZE)]
    )
    image_counts: list[list[int]] = field(default_factory=_empty_int_grid)
    annotation_counts: list[list[int]] = field(default_factory=_empty_int_grid)
    excluded_image_count: int = 0  # images without usable EXIF
    clamped_iso_count: int = 0


def per_bin_map(
    detections: DetectionSet,
    ground_truth: GroundTruthSet,
    exif_index: Mapping[str, ExifRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> BinScoreGrid:
    """Partition images by (exposure bin, ISO bin) and score each cell.

    Images whose EXIF record is missing or lacks exposure/ISO are excluded
    from the grid and counted. Within a cell, mAP is the mean AP over the
    categories with at least one ground truth in that cell.
    """
    grid = BinScoreGrid()
    cell_images: dict[tuple[int, int], list[str]] = {}
    for image_id in ground_truth.by_image:
        record = exif_index.get(image_id)
        if record is None or not record.has_grid_fields:
            grid.excluded_image_count += 1
            continue
        index = grid_index(record.exposure_time_s, record.iso)
        if record.iso >= ISO_CLAMP_THRESHOLD:
            grid.clamped_iso_count += 1
        key = (index.row, index.col)
        cell_images.setdefault(key, []).append(image_id)
        grid.image_counts[index.row][index.col] += 1
        grid.annotation_counts[index.row][index.col] += len(
            ground_truth.by_image[image_id]
        )
    for (row, col), images in sorted(cell_images.items()):
        grid.cells[row][col] = mean_average_precision(
            detections, ground_truth, iou_threshold, image_ids=images
        )
    return grid


def repeatability_pr(
    target_points: Sequence[tuple[float, float]],
    test_points: Sequence[tuple[float, float]],
    tolerance_px: float = DEFAULT_POINT_TOLERANCE_PX,
) -> PrPoint:
    """Precision/recall of re-detected interest points.

    Candidate pairs within the pixel tolerance are accepted greedily by
    ascending distance (ties by index order), one-to-one. Precision is
    matches/|test|, recall matches/|target|; an empty set leaves the
    corresponding component undefined rather than 0.
    """
    if not tolerance_px > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance_px!r}")
    candidates = []
    for ti, target in enumerate(target_points):
        for si, test in enumerate(test_points):
            distance = math.dist(target, test)
            if distance <= tolerance_px:
                candidates.append((distance, ti, si))
    candidates.sort()
    target_used = [False] * len(target_points)
    test_used = [False] * len(test_points)
    matches = 0
    for _, ti, si in candidates:
        if target_used[ti] or test_used[si]:
            continue
        target_used[ti] = True
        test_used[si] = True
        matches += 1
    precision = matches / len(test_points) if test_points else None
    recall = matches / len(target_points) if target_points else None
    return PrPoint(precision, recall)


def threshold_pr(p: PrPoint, floor: float) -> PrPoint:
    """Clamp both components up to ``floor`` (the display convention used
    for repeatability grids); undefined components stay undefined."""
    if not 0.0 <= floor <= 1.0:
        raise ValueError(f"floor must lie in [0, 1], got {floor!r}")
    lift = lambda v: v if v is None else max(v, floor)  # noqa: E731
    return PrPoint(lift(p.precision), lift(p.recall))
