"""Detector evaluation: greedy matching, precision-recall curves, 11-point AP and mAP."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import EmptyGroundTruth, MissingAnnotation, NoGroundTruthAtAll
from .model import ClassMap, Detection, GroundTruthObject, iou

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLD = 0.5

# Recall levels of the interpolated AP: 0.0, 0.1, ..., 1.0
RECALL_LEVELS = tuple(i / 10 for i in range(11))

SCHEMA_VERSION = 1

TP = "TP"
FP = "FP"


@dataclass(frozen=True)
class MatchResult:
    """
    Outcome of matching one class's detections against its ground truth.

    ``labels`` and ``matched_gt`` follow the order of the detections that
    were passed in; ``gt_matched`` follows the ground-truth order.
    """

    labels: tuple[str, ...]
    matched_gt: tuple[int | None, ...]
    gt_matched: tuple[bool, ...]

    @property
    def tp(self) -> int:
        """Detections labelled true positive."""
        return sum(1 for label in self.labels if label == TP)

    @property
    def fp(self) -> int:
        """Detections labelled false positive."""
        return sum(1 for label in self.labels if label == FP)

    @property
    def fn(self) -> int:
        """Ground-truth boxes no detection matched."""
        return len(self.gt_matched) - sum(self.gt_matched)


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) after each detection in descending-confidence order."""

    points: tuple[tuple[float, float], ...]
    n_ground_truth: int = 0
    tp: int = 0
    fp: int = 0

    @property
    def fn(self) -> int:
        """Ground-truth boxes of this class left unmatched."""
        return self.n_ground_truth - self.tp


@dataclass(frozen=True)
class ClassEvaluation:
    """AP and confusion counts of one class."""

    class_id: int
    ap: float
    tp: int
    fp: int
    fn: int
    curve: PRCurve


@dataclass(frozen=True)
class EvalReport:
    """Per-class AP and the class-averaged mAP at one IoU threshold."""

    iou_threshold: float
    map: float
    per_class: tuple[ClassEvaluation, ...]
    excluded_classes: tuple[int, ...] = ()

    @property
    def aps(self) -> dict[int, float]:
        """AP keyed by class id."""
        return {c.class_id: c.ap for c in self.per_class}

    def to_dict(self) -> dict[str, Any]:
        """JSON document; key order is fixed."""
        return {
            "schema_version": SCHEMA_VERSION,
            "iou_threshold": self.iou_threshold,
            "map": self.map,
            "per_class": [
                {
                    "class_id": c.class_id,
                    "ap": c.ap,
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                    "pr_curve": [[r, p] for r, p in c.curve.points],
                }
                for c in self.per_class
            ],
            "excluded_classes": list(self.excluded_classes),
        }


def _best_unmatched(
    det: Detection,
    gts: Sequence[GroundTruthObject],
    taken: set[int],
) -> tuple[int | None, float]:
    """Index and IoU of the unmatched same-class ground truth overlapping *det* most."""
    best_idx: int | None = None
    best_iou = 0.0
    for idx, gt in enumerate(gts):
        if idx in taken or gt.class_id != det.class_id:
            continue
        overlap = iou(det.box, gt.box)
        if overlap > best_iou:
            best_idx, best_iou = idx, overlap
    return best_idx, best_iou


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    class_id: int | None = None,
) -> MatchResult:
    """
    Greedy matching in descending confidence order.

    Each detection takes the unmatched same-class ground truth of highest
    IoU; it is a TP when that IoU is strictly above *iou_threshold*,
    otherwise an FP (and the ground truth stays available). Ground truths
    left unmatched are FNs. With *class_id* both inputs are first
    restricted to that class. Equal confidences keep input order.
    """
    if class_id is not None:
        dets = [d for d in dets if d.class_id == class_id]
        gts = [g for g in gts if g.class_id == class_id]

    labels: list[str] = [FP] * len(dets)
    matched_gt: list[int | None] = [None] * len(dets)
    taken: set[int] = set()

    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    for i in order:
        idx, overlap = _best_unmatched(dets[i], gts, taken)
        if idx is not None and overlap > iou_threshold:
            taken.add(idx)
            labels[i] = TP
            matched_gt[i] = idx

    return MatchResult(
        labels=tuple(labels),
        matched_gt=tuple(matched_gt),
        gt_matched=tuple(i in taken for i in range(len(gts))),
    )


def _pooled_key(item: tuple[Detection, str]) -> tuple[Any, ...]:
    det, image_id = item
    b = det.box
    return (-det.confidence, image_id, b.x_center, b.y_center, b.width, b.height)


def pr_curve(
    dets: Sequence[tuple[Detection, str]],
    gts: Mapping[str, Sequence[GroundTruthObject]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    class_id: int | None = None,
) -> PRCurve:
    """
    Precision-recall curve of one class, pooled across images.

    *dets* pairs each detection with its image id; *gts* maps image id to
    that image's ground truth. Detections are ranked by descending
    confidence and matched greedily within their own image.

    Raises:
        EmptyGroundTruth: If the class has no ground-truth instance.
    """
    if class_id is not None:
        dets = [(d, img) for d, img in dets if d.class_id == class_id]
        gts = {img: [g for g in objs if g.class_id == class_id] for img, objs in gts.items()}

    n_gt = sum(len(objs) for objs in gts.values())
    if n_gt == 0:
        raise EmptyGroundTruth(class_id if class_id is not None else -1)

    taken: dict[str, set[int]] = {}
    is_tp = np.zeros(len(dets), dtype=bool)
    for rank, (det, image_id) in enumerate(sorted(dets, key=_pooled_key)):
        image_taken = taken.setdefault(image_id, set())
        idx, overlap = _best_unmatched(det, gts.get(image_id, ()), image_taken)
        if idx is not None and overlap > iou_threshold:
            image_taken.add(idx)
            is_tp[rank] = True

    tp_cum = np.cumsum(is_tp)
    fp_cum = np.cumsum(~is_tp)
    recall = tp_cum / n_gt
    precision = tp_cum / np.maximum(tp_cum + fp_cum, 1)
    points = tuple((float(r), float(p)) for r, p in zip(recall, precision))

    tp = int(tp_cum[-1]) if len(dets) else 0
    return PRCurve(points=points, n_ground_truth=n_gt, tp=tp, fp=len(dets) - tp)


def average_precision_11pt(curve: PRCurve) -> float:
    """
    11-point interpolated average precision.

    The mean over recall levels 0.0, 0.1, ..., 1.0 of the maximum
    precision among points whose recall is at least that level (0 when
    there is none).
    """
    if not curve.points:
        return 0.0
    recalls = np.array([r for r, _ in curve.points])
    precisions = np.array([p for _, p in curve.points])
    total = 0.0
    for level in RECALL_LEVELS:
        mask = recalls >= level
        if mask.any():
            total += float(precisions[mask].max())
    return total / len(RECALL_LEVELS)


def evaluate_map(
    dets: Mapping[str, Sequence[Detection]],
    gts: Mapping[str, Sequence[GroundTruthObject]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> EvalReport:
    """
    Evaluate detections against ground truth for every class.

    mAP is the mean AP over classes with at least one ground-truth
    instance; classes that only appear in detections are listed in
    ``excluded_classes``.

    Raises:
        NoGroundTruthAtAll: If there is no ground-truth object.
        MissingAnnotation: If detections name images absent from *gts*.
    """
    if not any(gts.values()):
        raise NoGroundTruthAtAll("no ground-truth objects to evaluate against")

    missing = sorted(set(dets) - set(gts))
    if missing:
        raise MissingAnnotation(missing)

    gt_classes = sorted({o.class_id for objs in gts.values() for o in objs})
    det_classes = {d.class_id for ds in dets.values() for d in ds}
    excluded = tuple(sorted(det_classes - set(gt_classes)))

    pooled = [(d, image_id) for image_id in sorted(dets) for d in dets[image_id]]

    per_class: list[ClassEvaluation] = []
    for class_id in gt_classes:
        curve = pr_curve(pooled, gts, iou_threshold, class_id)
        ap = average_precision_11pt(curve)
        per_class.append(
            ClassEvaluation(class_id, ap, curve.tp, curve.fp, curve.fn, curve)
        )
        logger.debug(
            "class %d: AP=%.4f TP=%d FP=%d FN=%d",
            class_id, ap, curve.tp, curve.fp, curve.fn,
        )

    mean_ap = sum(c.ap for c in per_class) / len(per_class)
    if excluded:
        logger.info("Classes without ground truth excluded from mAP: %s", list(excluded))
    return EvalReport(
        iou_threshold=iou_threshold,
        map=mean_ap,
        per_class=tuple(per_class),
        excluded_classes=excluded,
    )


def format_summary(report: EvalReport, class_map: ClassMap | None = None) -> str:
    """Human-readable per-class table."""
    class_map = class_map or ClassMap.default()
    lines = [
        f"{'class':>5} {'symbol':>6} {'AP':>8} {'TP':>6} {'FP':>6} {'FN':>6}",
        "-" * 42,
    ]
    for c in report.per_class:
        lines.append(
            f"{c.class_id:>5} {class_map.symbol(c.class_id):>6} {c.ap:>8.4f} "
            f"{c.tp:>6} {c.fp:>6} {c.fn:>6}"
        )
    lines.append("-" * 42)
    lines.append(f"mAP@{report.iou_threshold:g}: {report.map:.4f}")
    if report.excluded_classes:
        excluded = ", ".join(str(c) for c in report.excluded_classes)
        lines.append(f"excluded (no ground truth): {excluded}")
    return "\n".join(lines)
