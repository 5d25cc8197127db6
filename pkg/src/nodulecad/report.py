"""Curve CSV files and dependency-free SVG line plots."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .errors import ParseError
from .evalmetrics import INTERPOLATION, PRCurve, PRPoint


def _header(meta: dict) -> list[str]:
    return [f"# {k}={v}" for k, v in meta.items()]


def format_pr_csv(curve: PRCurve, iou_threshold: float, **meta) -> str:
    lines = _header({"iou_threshold": iou_threshold, "interpolation": INTERPOLATION, "gt_count": curve.gt_count, **meta})
    lines.append("threshold,recall,precision")
    lines += [f"{p.threshold!r},{p.recall!r},{p.precision!r}" for p in curve.points]
    return "\n".join(lines) + "\n"


def format_f1_csv(points: Sequence[tuple[float, float]], iou_threshold: float, **meta) -> str:
    lines = _header({"iou_threshold": iou_threshold, "interpolation": INTERPOLATION, **meta})
    lines.append("threshold,f1")
    lines += [f"{t!r},{f!r}" for t, f in points]
    return "\n".join(lines) + "\n"


def _read_csv(text: str, columns: tuple[str, ...]) -> tuple[dict, list[tuple[float, ...]]]:
    meta: dict[str, str] = {}
    rows = []
    seen_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        if not seen_header:
            if tuple(c.strip() for c in line.split(",")) != columns:
                raise ParseError(f"expected column header {','.join(columns)}", lineno)
            seen_header = True
            continue
        fields = line.split(",")
        if len(fields) != len(columns):
            raise ParseError(f"expected {len(columns)} columns", lineno)
        try:
            rows.append(tuple(float(f) for f in fields))
        except ValueError:
            raise ParseError("non-numeric field", lineno) from None
    if not seen_header:
        raise ParseError("missing column header")
    return meta, rows


def parse_pr_csv(text: str) -> PRCurve:
    meta, rows = _read_csv(text, ("threshold", "recall", "precision"))
    return PRCurve([PRPoint(*r) for r in rows], int(meta.get("gt_count", 0)))


def parse_f1_csv(text: str) -> list[tuple[float, float]]:
    return [tuple(r) for r in _read_csv(text, ("threshold", "f1"))[1]]


def svg_line_plot(
    xs: Sequence[float],
    ys: Sequence[float],
    *,
    title: str,
    xlabel: str,
    ylabel: str,
    width: int = 480,
    height: int = 360,
) -> str:
    """Single-series plot on the unit square, SVG 1.1."""
    left, right, top, bottom = 56, 16, 36, 48
    pw, ph = width - left - right, height - top - bottom

    def px(x: float) -> float:
        return left + min(max(x, 0.0), 1.0) * pw

    def py(y: float) -> float:
        return top + (1.0 - min(max(y, 0.0), 1.0)) * ph

    pts = [(px(x), py(y)) for x, y in zip(xs, ys)]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(6):
        v = k / 5
        out.append(f'<line x1="{px(v):.1f}" y1="{top + ph}" x2="{px(v):.1f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(
            f'<text x="{px(v):.1f}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.1f}</text>'
        )
        out.append(f'<line x1="{left - 4}" y1="{py(v):.1f}" x2="{left}" y2="{py(v):.1f}" stroke="black"/>')
        out.append(
            f'<text x="{left - 7}" y="{py(v) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.1f}</text>'
        )
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    if pts:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        out.append(f'<polyline class="series" points="{coords}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pr_curve_svg(curve: PRCurve, ap: float) -> str:
    return svg_line_plot(
        [p.recall for p in curve.points],
        [p.precision for p in curve.points],
        title=f"Precision-Recall (AP {ap:.4f})",
        xlabel="Recall",
        ylabel="Precision",
    )


def f1_curve_svg(points: Sequence[tuple[float, float]]) -> str:
    # x axis is confidence ascending
    pts = sorted(points)
    return svg_line_plot([t for t, _ in pts], [f for _, f in pts], title="F1-Confidence", xlabel="Confidence", ylabel="F1")


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
