"""Detection-to-ground-truth matching and the precision/recall metric suite.

A detection is a true positive when its IoU with an unclaimed ground truth of
the same image and category is strictly greater than the threshold (0.2 by
default).  Detections are visited in descending confidence, ties by input
order, and each claims the highest-IoU eligible ground truth (ties by ground
truth input order).  Every other detection, including duplicates on an
already-claimed ground truth, is a false positive.

AP uses all-points interpolation: the precision envelope (running maximum
from the high-recall end) integrated over recall from 0 to the largest
recall reached.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .dataio import DetectionRecord, GroundTruthRecord
from .errors import UndefinedMetricError, ValidationError
from .geometry import centers_to_corners

DEFAULT_IOU_THRESHOLD = 0.2
INTERPOLATION = "all-points"


class Verdict(NamedTuple):
    confidence: float
    is_tp: bool


class PRPoint(NamedTuple):
    threshold: float
    recall: float
    precision: float


@dataclass
class MatchOutcome:
    verdicts: list[Verdict]
    fn_count: int
    gt_count: int
    iou_threshold: float = DEFAULT_IOU_THRESHOLD

    @property
    def tp_count(self) -> int:
        return sum(1 for v in self.verdicts if v.is_tp)

    @property
    def fp_count(self) -> int:
        return len(self.verdicts) - self.tp_count


@dataclass
class PRCurve:
    points: list[PRPoint]
    gt_count: int


def _check_threshold(iou_threshold: float) -> None:
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValidationError(f"iou_threshold {iou_threshold} outside [0, 1]")


def _corners(records) -> np.ndarray:
    return centers_to_corners(np.array([r.box.as_tuple() for r in records], dtype=np.float64).reshape(-1, 4))


def match_assignments(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> tuple[np.ndarray, list[int]]:
    """Priority order of detections and the matched ground-truth index for each.

    Returns ``(order, matched)`` where ``order`` lists detection indices in
    descending confidence and ``matched[k]`` is the index into ``gts`` claimed
    by detection ``order[k]``, or -1.
    """
    _check_threshold(iou_threshold)
    conf = np.array([d.confidence for d in dets], dtype=np.float64)
    order = np.argsort(-conf, kind="stable")

    gt_groups: dict[tuple, list[int]] = defaultdict(list)
    for j, g in enumerate(gts):
        gt_groups[(g.image_id, g.category_id)].append(j)
    det_groups: dict[tuple, list[int]] = defaultdict(list)
    for i in order:
        d = dets[i]
        det_groups[(d.image_id, d.category_id)].append(int(i))

    matched = np.full(len(dets), -1, dtype=np.int64)
    for key, det_idx in det_groups.items():
        gt_idx = gt_groups.get(key)
        if not gt_idx:
            continue
        ious = _kernels.iou_matrix(_corners([dets[i] for i in det_idx]), _corners([gts[j] for j in gt_idx]))
        hits = _kernels.greedy_match(ious, iou_threshold)
        for i, h in zip(det_idx, hits):
            if h >= 0:
                matched[i] = gt_idx[h]
    return order, [int(matched[i]) for i in order]


def match_detections(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchOutcome:
    order, matched = match_assignments(dets, gts, iou_threshold)
    verdicts = [Verdict(float(dets[i].confidence), m >= 0) for i, m in zip(order, matched)]
    tp = sum(v.is_tp for v in verdicts)
    return MatchOutcome(verdicts, len(gts) - tp, len(gts), iou_threshold)


def precision(tp: int, fp: int) -> float:
    if tp + fp == 0:
        raise UndefinedMetricError("precision undefined with no detections")
    return tp / (tp + fp)


def recall(tp: int, fn: int) -> float:
    if tp + fn == 0:
        raise UndefinedMetricError("recall undefined with no ground truth")
    return tp / (tp + fn)


def f1(p: float, r: float) -> float:
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def counts_at(outcome: MatchOutcome, threshold: float) -> tuple[int, int, int]:
    """(TP, FP, FN) over detections with confidence >= threshold."""
    tp = sum(1 for v in outcome.verdicts if v.confidence >= threshold and v.is_tp)
    fp = sum(1 for v in outcome.verdicts if v.confidence >= threshold and not v.is_tp)
    return tp, fp, outcome.gt_count - tp


def _sorted_verdicts(outcome: MatchOutcome) -> list[Verdict]:
    # stable, so already-ordered verdicts keep their order
    return sorted(outcome.verdicts, key=lambda v: -v.confidence)


def _sweep(outcome: MatchOutcome):
    """Yield (threshold, tp, fp) at each distinct confidence, descending."""
    verdicts = _sorted_verdicts(outcome)
    tp = fp = 0
    for k, v in enumerate(verdicts):
        if v.is_tp:
            tp += 1
        else:
            fp += 1
        last = k + 1 == len(verdicts) or verdicts[k + 1].confidence != v.confidence
        if last:
            yield v.confidence, tp, fp


def pr_curve(outcome: MatchOutcome) -> PRCurve:
    if outcome.gt_count <= 0:
        raise UndefinedMetricError("PR curve undefined with no ground truth")
    n = outcome.gt_count
    points = [PRPoint(t, tp / n, tp / (tp + fp)) for t, tp, fp in _sweep(outcome)]
    return PRCurve(points, n)


def precision_envelope(curve: PRCurve) -> np.ndarray:
    """Precision replaced by the maximum precision at any equal-or-higher recall."""
    p = np.array([pt.precision for pt in curve.points], dtype=np.float64)
    if p.size == 0:
        return p
    return np.maximum.accumulate(p[::-1])[::-1]


def average_precision(curve: PRCurve) -> float:
    if not curve.points:
        return 0.0
    r = np.array([pt.recall for pt in curve.points], dtype=np.float64)
    steps = np.diff(np.concatenate(([0.0], r)))
    # fsum: correctly rounded, so zero-width steps never perturb the total
    return math.fsum(steps * precision_envelope(curve))


def map_score(per_category_ap: Sequence[float]) -> float:
    if len(per_category_ap) == 0:
        raise ValidationError("mAP needs at least one category")
    return float(sum(per_category_ap) / len(per_category_ap))


def f1_confidence_curve(outcome: MatchOutcome) -> list[tuple[float, float]]:
    """(threshold, F1) pairs, descending threshold.

    The first point sits just above the highest confidence, where nothing is
    kept and F1 is 0.
    """
    if outcome.gt_count <= 0:
        raise UndefinedMetricError("F1 curve undefined with no ground truth")
    n = outcome.gt_count
    top = max((v.confidence for v in outcome.verdicts), default=1.0)
    points = [(math.nextafter(top, math.inf), 0.0)]
    for t, tp, fp in _sweep(outcome):
        points.append((t, f1(tp / (tp + fp), tp / n)))
    return points


def f1_at(outcome: MatchOutcome, threshold: float) -> float:
    """F1 keeping detections with confidence >= threshold; 0 when none are kept."""
    tp, fp, fn = counts_at(outcome, threshold)
    if tp + fp == 0:
        if tp + fn == 0:
            raise UndefinedMetricError("F1 undefined with no ground truth")
        return 0.0
    return f1(precision(tp, fp), recall(tp, fn))


# ---------------------------------------------------------------------------
# dataset-level evaluation
# ---------------------------------------------------------------------------


@dataclass
class OperatingPoint:
    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass
class CategoryResult:
    category_id: int
    outcome: MatchOutcome
    at_threshold: OperatingPoint
    ap: float | None
    best_f1: OperatingPoint | None
    max_precision: float | None


@dataclass
class EvaluationResult:
    categories: list[CategoryResult]
    overall: CategoryResult
    map: float
    iou_threshold: float
    conf_threshold: float
    image_count: int = 0
    notes: list[str] = field(default_factory=list)


def operating_point(outcome: MatchOutcome, threshold: float) -> OperatingPoint:
    tp, fp, fn = counts_at(outcome, threshold)
    p = tp / (tp + fp) if tp + fp else None
    r = tp / (tp + fn) if tp + fn else None
    f = f1(p, r) if p is not None and r is not None else None
    return OperatingPoint(threshold, tp, fp, fn, p, r, f)


def _category_result(cat: int, outcome: MatchOutcome, conf_threshold: float) -> CategoryResult:
    at = operating_point(outcome, conf_threshold)
    if outcome.gt_count == 0:
        return CategoryResult(cat, outcome, at, None, None, None)
    curve = pr_curve(outcome)
    ap = average_precision(curve)
    best = None
    for pt in curve.points:
        op = operating_point(outcome, pt.threshold)
        if best is None or op.f1 > best.f1:
            best = op
    max_p = max((pt.precision for pt in curve.points), default=None)
    return CategoryResult(cat, outcome, at, ap, best, max_p)


def evaluate_dataset(
    labels: dict[str, list[GroundTruthRecord]],
    detections: dict[str, list[DetectionRecord]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    conf_threshold: float = 0.0,
) -> EvaluationResult:
    """Match per image and category, then aggregate per category and overall.

    Raises UndefinedMetricError when no image carries any ground truth.
    """
    _check_threshold(iou_threshold)
    gts = [g for image in sorted(labels) for g in labels[image]]
    dets = [d for image in sorted(detections) for d in detections[image]]
    if not gts:
        raise UndefinedMetricError("no ground truth boxes in any image; recall and AP are undefined")
    cats = sorted({g.category_id for g in gts} | {d.category_id for d in dets})
    results = []
    notes = []
    for c in cats:
        outcome = match_detections(
            [d for d in dets if d.category_id == c], [g for g in gts if g.category_id == c], iou_threshold
        )
        res = _category_result(c, outcome, conf_threshold)
        if res.ap is None:
            notes.append(f"category {c} has detections but no ground truth; excluded from mAP")
        results.append(res)
    overall = _category_result(-1, match_detections(dets, gts, iou_threshold), conf_threshold)
    mean_ap = map_score([r.ap for r in results if r.ap is not None])
    return EvaluationResult(results, overall, mean_ap, iou_threshold, conf_threshold, len(set(labels) | set(detections)), notes)
