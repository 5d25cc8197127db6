"""Post-backbone half of a single-stage lung-nodule detector.

Grid decoding, non-maximum suppression, IoU matching against annotations,
precision/recall/F1/AP metrics, and the CIoU and objectness training losses.
Hot loops live in :mod:`nodulecad._kernels` (numba, with a numpy fallback).
"""

from ._kernels import BACKEND
from .dataio import DetectionRecord, GroundTruthRecord, split_dataset
from .decode import Anchor, HeadOutput, ScoredBox, decode_grid, encode_target, nms
from .evalmetrics import (
    MatchOutcome,
    PRCurve,
    average_precision,
    f1,
    f1_confidence_curve,
    map_score,
    match_detections,
    pr_curve,
    precision,
    recall,
)
from .geometry import BoxCenter, BoxCorner, ciou, iou, to_center, to_corner
from .losses import LossValue, box_loss, finite_difference_check, objectness_loss

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Anchor",
    "BoxCenter",
    "BoxCorner",
    "DetectionRecord",
    "GroundTruthRecord",
    "HeadOutput",
    "LossValue",
    "MatchOutcome",
    "PRCurve",
    "ScoredBox",
    "average_precision",
    "box_loss",
    "ciou",
    "decode_grid",
    "encode_target",
    "f1",
    "f1_confidence_curve",
    "finite_difference_check",
    "iou",
    "map_score",
    "match_detections",
    "nms",
    "objectness_loss",
    "pr_curve",
    "precision",
    "recall",
    "split_dataset",
    "to_center",
    "to_corner",
]
