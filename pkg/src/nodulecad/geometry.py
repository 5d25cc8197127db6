"""Axis-aligned boxes, conversions and overlap measures.

All arithmetic is float64.  Boxes are never clamped to the image, so boxes
that overhang an edge are valid geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels

# 4 / pi^2, scale of the aspect-ratio consistency term
ASPECT_SCALE = 4.0 / math.pi**2


@dataclass(frozen=True)
class BoxCorner:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"inverted box corners: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class BoxCenter:
    """Center-form box in normalized image fractions.

    Only ``w, h >= 0`` is enforced here.  The ``[0, 1]`` range on the center
    is checked by the file parsers; decoded boxes may overhang by half a cell.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w >= 0.0 and self.h >= 0.0):
            raise ValueError(f"negative box size: {self}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)


def to_corner(b: BoxCenter, image_w: float = 1.0, image_h: float = 1.0) -> BoxCorner:
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    return BoxCorner(
        (b.cx - b.w / 2.0) * image_w,
        (b.cy - b.h / 2.0) * image_h,
        (b.cx + b.w / 2.0) * image_w,
        (b.cy + b.h / 2.0) * image_h,
    )


def to_center(b: BoxCorner, image_w: float = 1.0, image_h: float = 1.0) -> BoxCenter:
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    return BoxCenter(
        (b.x_min + b.x_max) / 2.0 / image_w,
        (b.y_min + b.y_max) / 2.0 / image_h,
        (b.x_max - b.x_min) / image_w,
        (b.y_max - b.y_min) / image_h,
    )


def iou(a: BoxCorner, b: BoxCorner) -> float:
    """Intersection area over union area; 0 when the union is empty."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union > 0.0:
        return inter / union
    return 0.0


def aspect_term(pred: BoxCorner, truth: BoxCorner) -> float:
    """Aspect-ratio consistency ``v = 4/pi^2 (atan(W/H) - atan(w/h))^2``.

    ``atan2`` keeps the term defined for zero-height boxes.
    """
    d = math.atan2(truth.width, truth.height) - math.atan2(pred.width, pred.height)
    return ASPECT_SCALE * d * d


def ciou(pred: BoxCorner, truth: BoxCorner) -> float:
    """Complete IoU: IoU minus a center-distance and an aspect-ratio penalty.

    Lies in (-1.5, 1].  Two degenerate point boxes at the same location
    score 1.0.
    """
    cw = max(pred.x_max, truth.x_max) - min(pred.x_min, truth.x_min)
    ch = max(pred.y_max, truth.y_max) - min(pred.y_min, truth.y_min)
    diag2 = cw * cw + ch * ch
    if diag2 == 0.0:
        return 1.0
    o = iou(pred, truth)
    dx = (pred.x_min + pred.x_max - truth.x_min - truth.x_max) / 2.0
    dy = (pred.y_min + pred.y_max - truth.y_min - truth.y_max) / 2.0
    v = aspect_term(pred, truth)
    denom = 1.0 - o + v
    alpha = v / denom if denom > 0.0 else 0.0
    return o - (dx * dx + dy * dy) / diag2 - alpha * v


def corners_array(boxes: Sequence[BoxCorner]) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def centers_to_corners(centers: np.ndarray) -> np.ndarray:
    """Vectorized (N, 4) cx,cy,w,h -> x_min,y_min,x_max,y_max in the same units."""
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 4)
    half_w = c[:, 2] / 2.0
    half_h = c[:, 3] / 2.0
    return np.stack([c[:, 0] - half_w, c[:, 1] - half_h, c[:, 0] + half_w, c[:, 1] + half_h], axis=1)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU for (N, 4) and (M, 4) corner arrays or BoxCorner lists."""
    if not isinstance(a, np.ndarray):
        a = corners_array(a)
    if not isinstance(b, np.ndarray):
        b = corners_array(b)
    return _kernels.iou_matrix(a, b)
