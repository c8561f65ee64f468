"""Detection-label files: one `class_id cx cy w h` line per object.

All coordinates are center/size fractions normalized by image width and
height; files are named after the image stem and written without a
trailing blank line.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Union

from surgscan.core import InvalidBox, NormalizedBBox, PixelBBox, SurgScanError, validate_bbox

# One label record is exactly one normalized box.
LabelRecord = NormalizedBBox


class IoFailure(SurgScanError):
    """Filesystem problem while reading or writing dataset files."""


class MalformedLine(SurgScanError):
    """A label line whose shape or tokens cannot be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class OutOfRangeValue(SurgScanError):
    """A label line whose values violate the normalized-box invariants."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def to_normalized(b: PixelBBox, class_id: int, width: int, height: int) -> NormalizedBBox:
    """Convert a pixel box to center/size fractions of the image."""
    validate_bbox(b, width, height)
    return NormalizedBBox(
        class_id=class_id,
        cx=(b.x_min + b.x_max) / (2.0 * width),
        cy=(b.y_min + b.y_max) / (2.0 * height),
        w=(b.x_max - b.x_min) / width,
        h=(b.y_max - b.y_min) / height,
    )


def from_normalized(n: NormalizedBBox, width: int, height: int) -> PixelBBox:
    """Inverse of to_normalized, rounding half-up to integer pixels.

    May return a degenerate box when the fractional box spans less than
    a pixel; callers re-validate where that matters.
    """
    return PixelBBox(
        x_min=_round_half_up((n.cx - n.w / 2.0) * width),
        y_min=_round_half_up((n.cy - n.h / 2.0) * height),
        x_max=_round_half_up((n.cx + n.w / 2.0) * width),
        y_max=_round_half_up((n.cy + n.h / 2.0) * height),
    )


def _fit_axis(center: float, size: float) -> tuple[int, int]:
    """Quantize one axis to the millionths grid without leaving [0, 1].

    Rounding cx and w independently can push an edge up to ~1e-6 past the
    border, which the parser rightly rejects. Both edges cannot overflow at
    once (that would need size > 1), so shrinking the size by the overshoot
    always yields the nearest valid grid point.
    """
    c = _round_half_up(center * 1e6)
    s = max(1, _round_half_up(size * 1e6))
    # Edges live on the half-millionths grid: 2c +/- s in [0, 2_000_000].
    over = (2 * c + s) - 2_000_000
    if over > 0:
        s -= over
    under = s - 2 * c
    if under > 0:
        s -= under
    if s < 1:
        s = 1
        c = min(max(c, 1), 999_999)
    return c, s


def format_label_line(record: LabelRecord) -> str:
    cx, w = _fit_axis(record.cx, record.w)
    cy, h = _fit_axis(record.cy, record.h)
    return (
        f"{record.class_id} {cx / 1e6:.6f} {cy / 1e6:.6f} {w / 1e6:.6f} {h / 1e6:.6f}"
    )


def write_label_file(
    records: list[LabelRecord], image_stem: str, labels_dir: Union[Path, str]
) -> Path:
    """Write `<labels_dir>/<image_stem>.txt`, one line per object.

    Empty record lists produce a zero-byte file (a valid background
    image). Fixed 6-decimal floats, single spaces, newline-terminated
    lines, no trailing blank line.
    """
    labels_dir = Path(labels_dir)
    if not labels_dir.is_dir():
        raise IoFailure(f"labels directory does not exist: {labels_dir}")
    path = labels_dir / f"{image_stem}.txt"
    try:
        path.write_text("".join(format_label_line(r) + "\n" for r in records))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def parse_label_file(path: Union[Path, str]) -> list[LabelRecord]:
    """Parse a label file, tolerating extra whitespace and blank lines.

    Raises MalformedLine or OutOfRangeValue carrying the 1-based line
    number of the first offending line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    records: list[LabelRecord] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise MalformedLine(line_no, f"expected 5 fields, got {len(tokens)}")
        try:
            class_id = int(tokens[0])
            values = [float(t) for t in tokens[1:]]
        except ValueError as exc:
            raise MalformedLine(line_no, f"non-numeric field: {exc}") from exc
        try:
            records.append(NormalizedBBox(class_id, *values))
        except InvalidBox as exc:
            raise OutOfRangeValue(line_no, str(exc)) from exc
    return records
