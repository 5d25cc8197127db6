"""Grid head decoding, target encoding and non-maximum suppression.

Single-scale YOLOv5-style transform.  For cell ``(row, col)`` of an ``S x S``
grid and anchor ``(aw, ah)``::

    cx = (2 sigmoid(t_x) - 0.5 + col) / S
    cy = (2 sigmoid(t_y) - 0.5 + row) / S
    w  = aw * (2 sigmoid(t_w))**2
    h  = ah * (2 sigmoid(t_h))**2
    confidence = sigmoid(t_obj) * max_k sigmoid(t_cat[k])

Head dump text format: a header line ``S A K`` followed by ``S*S*A`` lines of
``5+K`` logits, cells row-major then anchor index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import EncodingError, ParseError
from .geometry import BoxCenter, centers_to_corners

# (w, h) as fractions of a 640 px input, the stride-32 anchors of the v5 P5 models
DEFAULT_ANCHORS: tuple[tuple[float, float], ...] = (
    (116 / 640, 90 / 640),
    (156 / 640, 198 / 640),
    (373 / 640, 326 / 640),
)
DEFAULT_GRID_SIZE = 13
DEFAULT_NMS_THRESHOLD = 0.45


@dataclass(frozen=True)
class Anchor:
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"anchor sides must be positive: {self}")


@dataclass(frozen=True)
class ScoredBox:
    category_id: int
    confidence: float
    box: BoxCenter


@dataclass
class HeadOutput:
    """Raw logits with shape ``(S, S, A, 5 + K)``."""

    grid_size: int
    anchors: list[Anchor]
    num_categories: int
    raw: np.ndarray

    def __post_init__(self):
        self.anchors = [a if isinstance(a, Anchor) else Anchor(*a) for a in self.anchors]
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.grid_size <= 0 or self.num_categories <= 0 or not self.anchors:
            raise ValueError("grid_size, num_categories and anchors must be positive")
        expected = (self.grid_size, self.grid_size, len(self.anchors), 5 + self.num_categories)
        if self.raw.size != math.prod(expected):
            raise ValueError(f"raw has {self.raw.size} values, expected shape {expected}")
        self.raw = self.raw.reshape(expected)

    @classmethod
    def zeros(cls, grid_size: int, anchors, num_categories: int = 1) -> "HeadOutput":
        shape = (grid_size, grid_size, len(anchors), 5 + num_categories)
        return cls(grid_size, list(anchors), num_categories, np.zeros(shape))


def sigmoid(x):
    """Logistic function that never overflows; exact 0.5 at 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def decode_grid(head: HeadOutput, conf_threshold: float = 0.0) -> list[ScoredBox]:
    """All anchor slots scoring at least ``conf_threshold``, best first.

    Ties in confidence keep (row, col, anchor) order.
    """
    s = head.grid_size
    raw = head.raw
    sig = sigmoid(raw)
    rows, cols = np.meshgrid(np.arange(s, dtype=np.float64), np.arange(s, dtype=np.float64), indexing="ij")
    aw = np.array([a.w for a in head.anchors])
    ah = np.array([a.h for a in head.anchors])

    cx = (2.0 * sig[..., 0] - 0.5 + cols[:, :, None]) / s
    cy = (2.0 * sig[..., 1] - 0.5 + rows[:, :, None]) / s
    w = aw * (2.0 * sig[..., 2]) ** 2
    h = ah * (2.0 * sig[..., 3]) ** 2
    cat_scores = sig[..., 5:]
    category = np.argmax(cat_scores, axis=-1)
    conf = sig[..., 4] * np.max(cat_scores, axis=-1)

    flat = [a.reshape(-1) for a in (cx, cy, w, h, conf, category)]
    cx, cy, w, h, conf, category = flat
    keep = np.flatnonzero(conf >= conf_threshold)
    order = keep[np.argsort(-conf[keep], kind="stable")]
    return [
        ScoredBox(int(category[i]), float(conf[i]), BoxCenter(float(cx[i]), float(cy[i]), float(w[i]), float(h[i])))
        for i in order
    ]


def encode_target(
    box: BoxCenter, cell: tuple[int, int], anchor_index: int, grid_size: int, anchors: Sequence
) -> tuple[float, float, float, float]:
    """Logits ``(t_x, t_y, t_w, t_h)`` that decode back to ``box`` from this slot.

    Raises EncodingError when the box is outside the open range the sigmoid
    can reach from the given cell and anchor.
    """
    row, col = cell
    a = anchors[anchor_index]
    a = a if isinstance(a, Anchor) else Anchor(*a)
    s = grid_size
    px = (box.cx * s - col + 0.5) / 2.0
    py = (box.cy * s - row + 0.5) / 2.0
    pw = math.sqrt(box.w / a.w) / 2.0
    ph = math.sqrt(box.h / a.h) / 2.0
    for name, p in (("cx", px), ("cy", py), ("w", pw), ("h", ph)):
        if not 0.0 < p < 1.0:
            raise EncodingError(f"{name} of {box} not reachable from cell {cell} anchor {anchor_index}")
    return (_logit(px), _logit(py), _logit(pw), _logit(ph))


def responsible_cell(box: BoxCenter, grid_size: int) -> tuple[int, int]:
    """The cell containing the box center, clipped to the grid."""
    col = min(max(int(math.floor(box.cx * grid_size)), 0), grid_size - 1)
    row = min(max(int(math.floor(box.cy * grid_size)), 0), grid_size - 1)
    return row, col


def nms(dets: Sequence[ScoredBox], iou_threshold: float = DEFAULT_NMS_THRESHOLD) -> list[ScoredBox]:
    """Greedy per-category suppression; survivors in descending confidence."""
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in [0, 1]")
    if not dets:
        return []
    conf = np.array([d.confidence for d in dets], dtype=np.float64)
    order = np.argsort(-conf, kind="stable")
    ordered = [dets[i] for i in order]
    corners = centers_to_corners(np.array([d.box.as_tuple() for d in ordered]))
    cats = np.array([d.category_id for d in ordered], dtype=np.int64)
    keep = _kernels.nms_keep(corners, cats, iou_threshold)
    return [d for d, k in zip(ordered, keep) if k]


# ---------------------------------------------------------------------------
# head dump text format
# ---------------------------------------------------------------------------


def parse_head_dump(text: str, anchors: Sequence, source: str | None = None) -> HeadOutput:
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty head dump", 1, source)
    n0, header = lines[0]
    try:
        s, a, k = (int(t) for t in header.split())
    except ValueError:
        raise ParseError("header must be three integers 'S A K'", n0, source) from None
    if s <= 0 or a <= 0 or k <= 0:
        raise ParseError("S, A and K must be positive", n0, source)
    if a != len(anchors):
        raise ParseError(f"dump has {a} anchors per cell but {len(anchors)} anchors are configured", n0, source)
    body = lines[1:]
    if len(body) != s * s * a:
        raise ParseError(f"expected {s * s * a} logit lines, found {len(body)}", n0, source)
    raw = np.empty((s * s * a, 5 + k), dtype=np.float64)
    for idx, (n, ln) in enumerate(body):
        toks = ln.split()
        if len(toks) != 5 + k:
            raise ParseError(f"expected {5 + k} logits, got {len(toks)}", n, source)
        try:
            raw[idx] = [float(t) for t in toks]
        except ValueError:
            raise ParseError("non-numeric logit", n, source) from None
    return HeadOutput(s, list(anchors), k, raw)


def format_head_dump(head: HeadOutput) -> str:
    s, a, k = head.grid_size, len(head.anchors), head.num_categories
    rows = head.raw.reshape(-1, 5 + k)
    out = [f"{s} {a} {k}"]
    out += [" ".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(out) + "\n"
