"""``nodulecad`` command line: split, decode, evaluate, check-grads.

Exit codes: 0 success, 2 input validation, 3 undefined metric, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_anchors
from .dataio import (
    format_detection_file,
    format_manifest,
    load_detection_dir,
    load_label_dir,
    split_dataset,
)
from .decode import decode_grid, nms, parse_head_dump
from .errors import NumericError, UndefinedMetricError, ValidationError
from .evalmetrics import EvaluationResult, average_precision, evaluate_dataset, f1_confidence_curve, pr_curve
from .geometry import BoxCenter
from .losses import box_loss, finite_difference_check, objectness_loss
from .report import f1_curve_svg, format_f1_csv, format_pr_csv, pr_curve_svg, write_text

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNDEFINED = 3
EXIT_NUMERIC = 4

GRAD_TOLERANCE = 1e-4
GRAD_EPSILON = 1e-6


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    cfg = cfg.update(
        iou_threshold=args.iou_thresh,
        nms_threshold=args.nms_thresh,
        conf_threshold=args.conf_thresh,
        seed=args.seed,
        train_count=getattr(args, "train_count", None),
        grid_size=getattr(args, "grid_size", None),
        anchors=parse_anchors(args.anchors) if getattr(args, "anchors", None) else None,
    )
    return cfg.validate()


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------


def cmd_split(args) -> int:
    cfg = _resolve(args)
    path = Path(args.ids_file)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    ids = [ln.strip() for ln in text.splitlines() if ln.strip()]
    split = split_dataset(ids, cfg.train_count, cfg.seed)
    out = Path(args.output) if args.output else Path(args.out_dir) / "split_manifest.txt"
    write_text(out, format_manifest(split))
    print(f"train={len(split.train_ids)} val={len(split.val_ids)} seed={split.seed} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------


def cmd_decode(args) -> int:
    cfg = _resolve(args)
    path = Path(args.head_dump)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    head = parse_head_dump(text, cfg.anchors, source=str(path))
    if head.grid_size != cfg.grid_size:
        raise ValidationError(f"{path}: dump grid size {head.grid_size} != configured grid_size {cfg.grid_size}")
    kept = nms(decode_grid(head, cfg.conf_threshold), cfg.nms_threshold)
    # the detection file format only carries boxes inside [0, 1]
    writable = [d for d in kept if all(0.0 <= v <= 1.0 for v in d.box.as_tuple())]
    dropped = len(kept) - len(writable)
    if dropped:
        print(f"warning: {dropped} decoded boxes extend past the normalized range and were not written", file=sys.stderr)
    body = format_detection_file((d.category_id, d.confidence, d.box) for d in writable)
    if args.output:
        write_text(Path(args.output), body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def format_report(result: EvaluationResult, cfg: RunConfig) -> str:
    lines = [
        "nodulecad evaluation",
        f"# iou_threshold={result.iou_threshold} conf_threshold={result.conf_threshold} "
        f"interpolation=all-points images={result.image_count}",
        f"# {cfg.provenance()}",
        "",
        f"{'category':>8} {'gt':>5} {'TP':>5} {'FP':>5} {'FN':>5} {'P':>7} {'R':>7} {'F1':>7} {'AP':>7}"
        f" {'bestF1':>7} {'@conf':>7} {'maxP':>7}",
    ]

    def row(label: str, r) -> str:
        at = r.at_threshold
        best = r.best_f1
        return (
            f"{label:>8} {r.outcome.gt_count:>5} {at.tp:>5} {at.fp:>5} {at.fn:>5} {_fmt(at.precision):>7} "
            f"{_fmt(at.recall):>7} {_fmt(at.f1):>7} {_fmt(r.ap):>7} {_fmt(best.f1 if best else None):>7} "
            f"{_fmt(best.threshold if best else None):>7} {_fmt(r.max_precision):>7}"
        )

    for r in result.categories:
        lines.append(row(str(r.category_id), r))
    lines.append(row("all", result.overall))
    lines.append("")
    lines.append(f"mAP@{result.iou_threshold} = {result.map:.6f}")
    lines += [f"note: {n}" for n in result.notes]
    return "\n".join(lines) + "\n"


def _write_curves(out_dir: Path, outcome, iou_threshold: float, suffix: str = "") -> None:
    curve = pr_curve(outcome)
    ap = average_precision(curve)
    f1_points = f1_confidence_curve(outcome)
    write_text(out_dir / f"pr_curve{suffix}.csv", format_pr_csv(curve, iou_threshold))
    write_text(out_dir / f"f1_curve{suffix}.csv", format_f1_csv(f1_points, iou_threshold))
    write_text(out_dir / f"pr_curve{suffix}.svg", pr_curve_svg(curve, ap))
    write_text(out_dir / f"f1_curve{suffix}.svg", f1_curve_svg(f1_points))


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    labels_dir, det_dir = Path(args.labels_dir), Path(args.detections_dir)
    for d in (labels_dir, det_dir):
        if not d.is_dir():
            raise ValidationError(f"{d} is not a directory")
    labels = load_label_dir(labels_dir)
    detections = load_detection_dir(det_dir)
    orphans = sorted(set(detections) - set(labels))
    if orphans:
        raise ValidationError(f"detection files without a label file: {', '.join(orphans[:5])}")
    result = evaluate_dataset(labels, detections, cfg.iou_threshold, cfg.conf_threshold)
    out_dir = Path(args.out_dir)
    _write_curves(out_dir, result.overall.outcome, cfg.iou_threshold)
    if len(result.categories) > 1:
        for r in result.categories:
            if r.ap is not None:
                _write_curves(out_dir, r.outcome, cfg.iou_threshold, suffix=f"_cat{r.category_id}")
    report = format_report(result, cfg)
    write_text(out_dir / "report.txt", report)
    sys.stdout.write(report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-grads
# ---------------------------------------------------------------------------


def gradient_trials(trials: int, seed: int) -> tuple[list[float], list[float]]:
    """Max relative FD error per trial for box_loss and objectness_loss."""
    if trials <= 0:
        raise ValidationError("trials must be positive")
    rng = np.random.default_rng(seed)
    box_errs, obj_errs = [], []
    for _ in range(trials):
        truth = BoxCenter(*rng.uniform(0.3, 0.7, 2), *rng.uniform(0.05, 0.4, 2))
        centre = np.array([truth.cx, truth.cy]) + rng.normal(0.0, 0.05, 2)
        size = np.array([truth.w, truth.h]) * np.exp(rng.normal(0.0, 0.3, 2))
        pred = np.concatenate([centre, size])
        box_errs.append(
            finite_difference_check(lambda p: box_loss(BoxCenter(*p), truth), pred, GRAD_EPSILON)
        )
        logits = rng.normal(0.0, 3.0, 16)
        targets = (rng.uniform(size=16) < 0.5).astype(np.float64)
        obj_errs.append(finite_difference_check(lambda x: objectness_loss(x, targets), logits, GRAD_EPSILON))
    return box_errs, obj_errs


def cmd_check_grads(args) -> int:
    seed = _resolve(args).seed
    box_errs, obj_errs = gradient_trials(args.trials, seed)
    ok = True
    print(f"check-grads trials={args.trials} seed={seed} epsilon={GRAD_EPSILON:g} tolerance={GRAD_TOLERANCE:g}")
    for name, errs in (("box_loss", box_errs), ("objectness_loss", obj_errs)):
        worst = max(errs)
        passed = worst < GRAD_TOLERANCE
        ok &= passed
        print(f"{name:<16} max_rel_error={worst:.3e} {'PASS' if passed else 'FAIL'}")
    if not ok:
        raise NumericError("analytic gradient disagrees with central differences")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} outside [0, 1]")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file; flags override it")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--iou-thresh", type=_unit_float, help="TP matching IoU threshold (default 0.2)")
    common.add_argument("--nms-thresh", type=_unit_float, help="NMS IoU threshold (default 0.45)")
    common.add_argument("--conf-thresh", type=_unit_float, help="confidence threshold (default 0.001)")
    common.add_argument("--seed", type=_nonneg_int, help="unsigned seed")

    parser = argparse.ArgumentParser(prog="nodulecad", description="Lung-nodule detection post-processing and evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[common], help="deterministic train/validation split")
    p.add_argument("ids_file", help="one image id per line")
    p.add_argument("--train-count", type=_nonneg_int)
    p.add_argument("-o", "--output", help="manifest path (default OUT_DIR/split_manifest.txt)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("decode", parents=[common], help="decode a raw head dump into a detection file")
    p.add_argument("head_dump")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--anchors", help="'w,h; w,h; ...' normalized anchor sizes")
    p.add_argument("-o", "--output", help="detection file path (default stdout)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", parents=[common], help="match detections to labels and report metrics")
    p.add_argument("labels_dir")
    p.add_argument("detections_dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check-grads", parents=[common], help="finite-difference check of the loss gradients")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_check_grads)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
