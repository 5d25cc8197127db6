"""Hot inner loops: pairwise IoU, greedy NMS and greedy detection matching.

Each kernel exists twice: a numba ``@njit`` loop and a pure-numpy version.
The public names (``iou_matrix``, ``nms_keep``, ``greedy_match``) are bound at
import time.  Set ``NODULECAD_DISABLE_NUMBA=1`` (or run without numba
installed) to force the numpy path.  Both paths produce bit-identical results.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("NODULECAD_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by NODULECAD_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def iou_matrix_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU between every row of ``a`` (N, 4) and ``b`` (M, 4), corner form."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def nms_keep_numpy(boxes: np.ndarray, categories: np.ndarray, iou_threshold: float) -> np.ndarray:
    """Greedy suppression over boxes already sorted by priority.

    Returns a boolean keep-mask aligned with ``boxes``.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    categories = np.asarray(categories, dtype=np.int64)
    n = boxes.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    alive = np.ones(n, dtype=np.bool_)
    for i in range(n):
        if not alive[i]:
            continue
        keep[i] = True
        rest = np.flatnonzero(alive[i + 1 :]) + i + 1
        if rest.size == 0:
            break
        ious = iou_matrix_numpy(boxes[i : i + 1], boxes[rest])[0]
        kill = (ious > iou_threshold) & (categories[rest] == categories[i])
        alive[rest[kill]] = False
    return keep


def greedy_match_numpy(ious: np.ndarray, iou_threshold: float) -> np.ndarray:
    """Assign ground truths to detections in row order.

    ``ious`` is (N detections in priority order, M ground truths).  Each
    detection takes the unclaimed ground truth with the highest IoU strictly
    above the threshold, ties to the lowest column.  Returns the column index
    per detection, -1 for unmatched.
    """
    ious = np.asarray(ious, dtype=np.float64)
    n, m = ious.shape
    taken = np.zeros(m, dtype=np.bool_)
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        row = np.where(taken | ~(ious[i] > iou_threshold), -np.inf, ious[i])
        if m == 0 or not np.isfinite(row).any():
            continue
        j = int(np.argmax(row))
        taken[j] = True
        out[i] = j
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _pair_iou(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1):
        iw = min(ax1, bx1) - max(ax0, bx0)
        ih = min(ay1, by1) - max(ay0, by0)
        inter = max(iw, 0.0) * max(ih, 0.0)
        union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
        if union > 0.0:
            return inter / union
        return 0.0

    @njit(cache=True)
    def _iou_matrix_jit(a, b):
        n = a.shape[0]
        m = b.shape[0]
        out = np.zeros((n, m), dtype=np.float64)
        for i in range(n):
            for j in range(m):
                out[i, j] = _pair_iou(a[i, 0], a[i, 1], a[i, 2], a[i, 3], b[j, 0], b[j, 1], b[j, 2], b[j, 3])
        return out

    @njit(cache=True)
    def _nms_keep_jit(boxes, categories, iou_threshold):
        n = boxes.shape[0]
        keep = np.zeros(n, dtype=np.bool_)
        alive = np.ones(n, dtype=np.bool_)
        for i in range(n):
            if not alive[i]:
                continue
            keep[i] = True
            for j in range(i + 1, n):
                if not alive[j] or categories[j] != categories[i]:
                    continue
                v = _pair_iou(
                    boxes[i, 0], boxes[i, 1], boxes[i, 2], boxes[i, 3],
                    boxes[j, 0], boxes[j, 1], boxes[j, 2], boxes[j, 3],
                )
                if v > iou_threshold:
                    alive[j] = False
        return keep

    @njit(cache=True)
    def _greedy_match_jit(ious, iou_threshold):
        n, m = ious.shape
        taken = np.zeros(m, dtype=np.bool_)
        out = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            best = -1
            best_v = -1.0
            for j in range(m):
                if taken[j]:
                    continue
                v = ious[i, j]
                if v > iou_threshold and v > best_v:
                    best = j
                    best_v = v
            if best >= 0:
                taken[best] = True
                out[i] = best
        return out

    def iou_matrix_numba(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
        b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
        return _iou_matrix_jit(a, b)

    def nms_keep_numba(boxes: np.ndarray, categories: np.ndarray, iou_threshold: float) -> np.ndarray:
        boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
        categories = np.ascontiguousarray(categories, dtype=np.int64)
        return _nms_keep_jit(boxes, categories, float(iou_threshold))

    def greedy_match_numba(ious: np.ndarray, iou_threshold: float) -> np.ndarray:
        ious = np.ascontiguousarray(ious, dtype=np.float64)
        if ious.ndim != 2:
            raise ValueError("ious must be 2-D")
        return _greedy_match_jit(ious, float(iou_threshold))

    iou_matrix = iou_matrix_numba
    nms_keep = nms_keep_numba
    greedy_match = greedy_match_numba
else:
    iou_matrix = iou_matrix_numpy
    nms_keep = nms_keep_numpy
    greedy_match = greedy_match_numpy
