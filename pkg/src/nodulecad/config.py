"""Run configuration: flat ``key = value`` files overridden by command-line flags.

``batch_size``, ``epochs``, ``learning_rate`` and ``optimizer`` describe the
training run that produced the detections.  They are echoed in report headers
and drive nothing.  ``epochs`` defaults to 145, the hyperparameter-table value;
the training narrative quotes 100 for the same run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .decode import DEFAULT_ANCHORS, DEFAULT_GRID_SIZE, DEFAULT_NMS_THRESHOLD
from .errors import ParseError, ValidationError
from .evalmetrics import DEFAULT_IOU_THRESHOLD


def parse_anchors(text: str) -> tuple[tuple[float, float], ...]:
    """``"w,h; w,h; ..."`` in normalized units."""
    out = []
    for chunk in text.replace(";", " ").split():
        w, sep, h = chunk.partition(",")
        if not sep:
            raise ValidationError(f"anchor {chunk!r} must be 'w,h'")
        try:
            out.append((float(w), float(h)))
        except ValueError:
            raise ValidationError(f"anchor {chunk!r} is not numeric") from None
    if not out:
        raise ValidationError("at least one anchor is required")
    return tuple(out)


def format_anchors(anchors) -> str:
    return "; ".join(f"{w!r},{h!r}" for w, h in anchors)


@dataclass
class RunConfig:
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    nms_threshold: float = DEFAULT_NMS_THRESHOLD
    conf_threshold: float = 0.001
    image_size: int = 416
    grid_size: int = DEFAULT_GRID_SIZE
    anchors: tuple[tuple[float, float], ...] = field(default=DEFAULT_ANCHORS)
    seed: int = 0
    train_count: int = 239
    batch_size: int = 16
    epochs: int = 145
    learning_rate: float = 0.01
    optimizer: str = "SGD"

    def validate(self) -> "RunConfig":
        for name in ("iou_threshold", "nms_threshold", "conf_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        for name in ("image_size", "grid_size", "train_count"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be unsigned")
        if any(not (w > 0 and h > 0) for w, h in self.anchors):
            raise ValidationError("anchor sides must be positive")
        return self

    def update(self, **values) -> "RunConfig":
        """Copy with the non-None entries of ``values`` applied."""
        given = {k: v for k, v in values.items() if v is not None}
        return dataclasses.replace(self, **given)

    def provenance(self) -> str:
        return (
            f"image_size={self.image_size} batch_size={self.batch_size} epochs={self.epochs} "
            f"learning_rate={self.learning_rate} optimizer={self.optimizer}"
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str, lineno: int, source):
    kind = type(getattr(RunConfig(), name))
    try:
        if name == "anchors":
            return parse_anchors(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except (ValueError, ValidationError) as exc:
        raise ParseError(f"bad value for {name}: {exc}", lineno, source) from None


def parse_config(text: str, source: str | None = None) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ParseError("expected 'key = value'", lineno, source)
        if key not in _FIELDS:
            raise ParseError(f"unknown config key {key!r}", lineno, source)
        values[key] = _coerce(key, raw.strip(), lineno, source)
    return values


def load_config(path: Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return RunConfig().update(**parse_config(text, source=str(path)))


def format_config(cfg: RunConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        lines.append(f"{name} = {format_anchors(v) if name == 'anchors' else v}")
    return "\n".join(lines) + "\n"
