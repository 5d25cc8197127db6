"""Label/detection text formats and the deterministic train/validation split.

Label lines are ``category cx cy w h`` and detection lines are
``category confidence cx cy w h``; fields are separated by any run of spaces
or tabs and all box values are normalized fractions in ``[0, 1]``.

The split shuffles with Fisher-Yates driven by SplitMix64, a 64-bit
generator small enough to re-implement anywhere::

    state += 0x9E3779B97F4A7C15                    (mod 2**64)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9       (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB       (mod 2**64)
    return z ^ (z >> 31)

Bounded draws in ``[0, n)`` reject raw outputs below ``2**64 mod n`` and take
the remainder, so every index is exactly equiprobable.  For ``i`` from
``len(ids) - 1`` down to 1 the shuffle swaps position ``i`` with a draw in
``[0, i]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, RangeError, ValidationError
from .geometry import BoxCenter

_MASK64 = (1 << 64) - 1


class DegenerateBoxWarning(UserWarning):
    """An annotation with zero width or height was accepted."""


@dataclass(frozen=True)
class GroundTruthRecord:
    image_id: str
    category_id: int
    box: BoxCenter


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    category_id: int
    confidence: float
    box: BoxCenter

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: list[str]
    val_ids: list[str]
    seed: int


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _parse_category(tok: str, lineno: int, source) -> int:
    try:
        cat = int(tok)
    except ValueError:
        raise ParseError(f"category {tok!r} is not an integer", lineno, source) from None
    if cat < 0:
        raise RangeError(f"category {cat} is negative", lineno, source)
    return cat


def _parse_floats(tokens: Sequence[str], lineno: int, source) -> list[float]:
    out = []
    for tok in tokens:
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(f"field {tok!r} is not a number", lineno, source) from None
    return out


def _parse_box(values: Sequence[float], lineno: int, source) -> BoxCenter:
    names = ("cx", "cy", "w", "h")
    for name, v in zip(names, values):
        if not 0.0 <= v <= 1.0:
            raise RangeError(f"{name}={v!r} outside [0, 1]", lineno, source)
    if values[2] == 0.0 or values[3] == 0.0:
        where = f"{source}:" if source else ""
        warnings.warn(f"{where}line {lineno}: degenerate box with zero width or height", DegenerateBoxWarning, stacklevel=3)
    return BoxCenter(*values)


def _records(text: str, n_fields: int, source):
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != n_fields:
            raise ParseError(f"expected {n_fields} fields, got {len(tokens)}", lineno, source)
        yield lineno, tokens


def parse_label_file(text: str, source: str | None = None) -> list[tuple[int, BoxCenter]]:
    """Parse ``category cx cy w h`` lines, preserving file order."""
    out = []
    for lineno, tokens in _records(text, 5, source):
        cat = _parse_category(tokens[0], lineno, source)
        out.append((cat, _parse_box(_parse_floats(tokens[1:], lineno, source), lineno, source)))
    return out


def parse_detection_file(text: str, source: str | None = None) -> list[tuple[int, float, BoxCenter]]:
    """Parse ``category confidence cx cy w h`` lines, preserving file order."""
    out = []
    for lineno, tokens in _records(text, 6, source):
        cat = _parse_category(tokens[0], lineno, source)
        values = _parse_floats(tokens[1:], lineno, source)
        conf = values[0]
        if not 0.0 <= conf <= 1.0:
            raise RangeError(f"confidence={conf!r} outside [0, 1]", lineno, source)
        out.append((cat, conf, _parse_box(values[1:], lineno, source)))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def format_label_file(records: Iterable[tuple[int, BoxCenter]]) -> str:
    lines = [" ".join([str(cat)] + [_fmt(v) for v in box.as_tuple()]) for cat, box in records]
    return "".join(line + "\n" for line in lines)


def format_detection_file(records: Iterable[tuple[int, float, BoxCenter]]) -> str:
    lines = [
        " ".join([str(cat), _fmt(conf)] + [_fmt(v) for v in box.as_tuple()])
        for cat, conf, box in records
    ]
    return "".join(line + "\n" for line in lines)


def load_label_dir(path: Path) -> dict[str, list[GroundTruthRecord]]:
    """Read every ``*.txt`` in a directory; the file stem is the image id."""
    out: dict[str, list[GroundTruthRecord]] = {}
    for f in sorted(Path(path).glob("*.txt")):
        recs = parse_label_file(f.read_text(), source=str(f))
        out[f.stem] = [GroundTruthRecord(f.stem, c, b) for c, b in recs]
    return out


def load_detection_dir(path: Path) -> dict[str, list[DetectionRecord]]:
    out: dict[str, list[DetectionRecord]] = {}
    for f in sorted(Path(path).glob("*.txt")):
        recs = parse_detection_file(f.read_text(), source=str(f))
        out[f.stem] = [DetectionRecord(f.stem, c, p, b) for c, p, b in recs]
    return out


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------


class SplitMix64:
    """SplitMix64 generator; see the module docstring for the exact recurrence."""

    def __init__(self, seed: int):
        if seed < 0 or seed > _MASK64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        floor = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= floor:
                return r % n


def split_dataset(ids: Sequence[str], train_count: int, seed: int) -> DatasetSplit:
    ids = list(ids)
    if len(set(ids)) != len(ids):
        seen, dups = set(), []
        for i in ids:
            if i in seen:
                dups.append(i)
            seen.add(i)
        raise ValidationError(f"duplicate ids: {sorted(set(dups))[:5]}")
    if not 0 <= train_count <= len(ids):
        raise ValidationError(f"train_count {train_count} outside [0, {len(ids)}]")
    rng = SplitMix64(seed)
    order = list(ids)
    for i in range(len(order) - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return DatasetSplit(order[:train_count], order[train_count:], seed)


def format_manifest(split: DatasetSplit) -> str:
    lines = [f"# seed={split.seed} train={len(split.train_ids)} val={len(split.val_ids)}"]
    lines += [f"train {i}" for i in split.train_ids]
    lines += [f"val {i}" for i in split.val_ids]
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> DatasetSplit:
    seed = None
    train, val = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, value = tok.partition("=")
                if key == "seed":
                    seed = int(value)
            continue
        kind, _, ident = line.partition(" ")
        if kind == "train":
            train.append(ident)
        elif kind == "val":
            val.append(ident)
        else:
            raise ParseError(f"unknown manifest entry {kind!r}", lineno)
    if seed is None:
        raise ParseError("manifest header with seed is missing")
    return DatasetSplit(train, val, seed)
