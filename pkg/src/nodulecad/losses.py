"""Box regression (1 - CIoU) and objectness (logit BCE) losses with analytic gradients.

Kinks from ``min``/``max`` in the overlap and enclosing-box terms use the
midpoint subgradient (slope 1/2 on a tie).  With that convention the gradient
of ``box_loss(b, b)`` is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError, ValidationError
from .geometry import ASPECT_SCALE, BoxCenter, aspect_term, iou, to_corner


@dataclass(frozen=True)
class LossValue:
    value: float
    gradient: np.ndarray


def _slope_lt(a: float, b: float) -> float:
    # d/da of min(a, b)
    return 1.0 if a < b else (0.5 if a == b else 0.0)


def _slope_gt(a: float, b: float) -> float:
    # d/da of max(a, b)
    return 1.0 if a > b else (0.5 if a == b else 0.0)


def _relu_slope(x: float) -> float:
    return 1.0 if x > 0 else (0.5 if x == 0 else 0.0)


def box_loss(pred: BoxCenter, truth: BoxCenter, *, alpha: float | None = None) -> LossValue:
    """``1 - ciou(pred, truth)`` and its gradient w.r.t. pred ``(cx, cy, w, h)``.

    By default the trade-off weight ``alpha = v / (1 - IoU + v)`` is
    differentiated along with everything else, so the gradient is the true
    gradient of the returned value.  Passing ``alpha`` pins it to a constant,
    which gives the usual detector-training gradient ``alpha * dv`` for the
    aspect term.
    """
    if not (truth.w > 0 and truth.h > 0):
        raise ValidationError("truth box must have positive width and height")
    cx, cy, w, h = pred.as_tuple()
    tcx, tcy, tw, th = truth.as_tuple()

    d_x1 = np.array([1.0, 0.0, -0.5, 0.0])
    d_x2 = np.array([1.0, 0.0, 0.5, 0.0])
    d_y1 = np.array([0.0, 1.0, 0.0, -0.5])
    d_y2 = np.array([0.0, 1.0, 0.0, 0.5])
    x1, x2, y1, y2 = cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2
    tx1, tx2, ty1, ty2 = tcx - tw / 2, tcx + tw / 2, tcy - th / 2, tcy + th / 2

    # intersection
    iw_raw = min(x2, tx2) - max(x1, tx1)
    ih_raw = min(y2, ty2) - max(y1, ty1)
    d_iw_raw = _slope_lt(x2, tx2) * d_x2 - _slope_gt(x1, tx1) * d_x1
    d_ih_raw = _slope_lt(y2, ty2) * d_y2 - _slope_gt(y1, ty1) * d_y1
    iw, ih = max(iw_raw, 0.0), max(ih_raw, 0.0)
    d_iw = _relu_slope(iw_raw) * d_iw_raw
    d_ih = _relu_slope(ih_raw) * d_ih_raw
    inter = iw * ih
    d_inter = d_iw * ih + iw * d_ih

    # union and IoU
    # areas from corner differences so inter == union exactly when pred == truth
    pw, ph = x2 - x1, y2 - y1
    union = pw * ph + (tx2 - tx1) * (ty2 - ty1) - inter
    d_union = np.array([0.0, 0.0, ph, pw]) - d_inter
    overlap = inter / union
    d_iou = (d_inter * union - inter * d_union) / (union * union)

    # normalized center distance
    rho2 = (cx - tcx) ** 2 + (cy - tcy) ** 2
    d_rho2 = np.array([2.0 * (cx - tcx), 2.0 * (cy - tcy), 0.0, 0.0])
    cw = max(x2, tx2) - min(x1, tx1)
    ch = max(y2, ty2) - min(y1, ty1)
    d_cw = _slope_gt(x2, tx2) * d_x2 - _slope_lt(x1, tx1) * d_x1
    d_ch = _slope_gt(y2, ty2) * d_y2 - _slope_lt(y1, ty1) * d_y1
    diag2 = cw * cw + ch * ch
    d_diag2 = 2.0 * cw * d_cw + 2.0 * ch * d_ch
    dist = rho2 / diag2
    d_dist = (d_rho2 - dist * d_diag2) / diag2

    # aspect-ratio term
    gap = math.atan2(tw, th) - math.atan2(w, h)
    v = ASPECT_SCALE * gap * gap
    r2 = w * w + h * h
    d_theta = np.array([0.0, 0.0, h / r2, -w / r2]) if r2 > 0 else np.zeros(4)
    d_v = -2.0 * ASPECT_SCALE * gap * d_theta

    denom = 1.0 - overlap + v
    if alpha is None:
        if denom > 0.0:
            penalty = v * v / denom
            d_penalty = (2.0 * v * d_v * denom - v * v * (d_v - d_iou)) / (denom * denom)
        else:
            penalty, d_penalty = 0.0, np.zeros(4)
    else:
        penalty = alpha * v
        d_penalty = alpha * d_v

    value = 1.0 - overlap + dist + penalty
    grad = -d_iou + d_dist + d_penalty
    return LossValue(float(value), grad)


def ciou_alpha(pred: BoxCenter, truth: BoxCenter) -> float:
    """The aspect trade-off weight at the current pred, for pinning in ``box_loss``."""
    a, b = to_corner(pred), to_corner(truth)
    v = aspect_term(a, b)
    denom = 1.0 - iou(a, b) + v
    return v / denom if denom > 0.0 else 0.0


def objectness_loss(logits, targets) -> LossValue:
    """Mean binary cross-entropy on logits; gradient ``(sigmoid(x) - y) / n``."""
    x = np.asarray(logits, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.size == 0 or x.size != y.size:
        raise ValidationError(f"logits ({x.size}) and targets ({y.size}) must be equal, non-zero lengths")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("targets must be 0 or 1")
    n = x.size
    # max(x, 0) - x*y + log(1 + exp(-|x|))
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    e = np.exp(-np.abs(x))
    sig = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return LossValue(float(np.sum(per) / n), (sig - y) / n)


def finite_difference_check(
    loss_fn: Callable[[np.ndarray], LossValue],
    params,
    epsilon: float = 1e-6,
) -> float:
    """Max over coordinates of ``|analytic - central| / max(1, |analytic|)``."""
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    p = np.array(params, dtype=np.float64).ravel()
    base = loss_fn(p.copy())
    analytic = np.asarray(base.gradient, dtype=np.float64).ravel()
    if analytic.size != p.size:
        raise ValidationError(f"gradient has {analytic.size} entries for {p.size} parameters")
    if not (math.isfinite(base.value) and np.all(np.isfinite(analytic))):
        raise NumericError("non-finite loss or gradient at the evaluation point")
    worst = 0.0
    for i in range(p.size):
        hi, lo = p.copy(), p.copy()
        hi[i] += epsilon
        lo[i] -= epsilon
        f_hi, f_lo = loss_fn(hi).value, loss_fn(lo).value
        if not (math.isfinite(f_hi) and math.isfinite(f_lo)):
            raise NumericError(f"non-finite loss when probing coordinate {i}")
        numeric = (f_hi - f_lo) / (2.0 * epsilon)
        worst = max(worst, abs(analytic[i] - numeric) / max(1.0, abs(analytic[i])))
    return worst
