"""Evaluation arithmetic: confusion matrices, PRF1, ROC-AUC, comparison tables.

All metric computations are implemented here directly (no external metrics
package) so their conventions are pinned down: macro averaging, zero for
empty denominators, half-credit for score ties.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from surgscan.core import SurgScanError


class LengthMismatch(SurgScanError):
    pass


class UnknownLabel(SurgScanError):
    pass


class EmptyMatrix(SurgScanError):
    pass


class DegenerateLabels(SurgScanError):
    """A binary ROC problem with only one class present."""


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Square tally of truth (rows) against prediction (columns)."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.counts, other.counts)


def confusion(
    preds: Sequence[str], truths: Sequence[str], classes: Sequence[str]
) -> ConfusionMatrix:
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(truths)} truths")
    index = {label: i for i, label in enumerate(classes)}
    counts = np.zeros((len(index), len(index)), dtype=np.int64)
    for pred, truth in zip(preds, truths):
        if pred not in index:
            raise UnknownLabel(f"prediction {pred!r} not in class list")
        if truth not in index:
            raise UnknownLabel(f"truth {truth!r} not in class list")
        counts[index[truth], index[pred]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def accuracy(m: ConfusionMatrix) -> float:
    total = m.total
    if total == 0:
        raise EmptyMatrix("no samples tallied")
    return float(np.trace(m.counts)) / total


def per_class_prf1(m: ConfusionMatrix) -> list[tuple[str, float, float, float]]:
    """Per-class (precision, recall, f1); zero denominators yield 0."""
    if m.total == 0:
        raise EmptyMatrix("no samples tallied")
    rows = []
    for i, label in enumerate(m.classes):
        tp = float(m.counts[i, i])
        col = float(m.counts[:, i].sum())
        row = float(m.counts[i, :].sum())
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        rows.append((label, precision, recall, f1))
    return rows


def macro_prf1(m: ConfusionMatrix) -> tuple[float, float, float]:
    """Unweighted macro average of per-class precision/recall/F1."""
    per_class = per_class_prf1(m)
    k = len(per_class)
    precision = sum(p for _, p, _, _ in per_class) / k
    recall = sum(r for _, _, r, _ in per_class) / k
    f1 = sum(f for _, _, _, f in per_class) / k
    return precision, recall, f1


def _midranks(values: np.ndarray) -> np.ndarray:
    """One-based ranks with ties averaged."""
    ordered = np.sort(values)
    lo = np.searchsorted(ordered, values, side="left")
    hi = np.searchsorted(ordered, values, side="right")
    return (lo + hi + 1) / 2.0


def roc_auc(scores: Sequence[float], positives: Sequence[bool]) -> float:
    """Binary AUC: P(score_pos > score_neg) + 0.5 * P(tie), via midranks."""
    if len(scores) != len(positives):
        raise LengthMismatch(f"{len(scores)} scores vs {len(positives)} labels")
    scores_arr = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(positives, dtype=bool)
    n_pos = int(mask.sum())
    n_neg = len(mask) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("need at least one positive and one negative sample")
    ranks = _midranks(scores_arr)
    return float((ranks[mask].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc_multiclass(
    scores: Sequence[Sequence[float]], truths: Sequence[str], classes: Sequence[str]
) -> float:
    """One-vs-rest macro AUC from an (N, K) score matrix."""
    matrix = np.asarray(scores, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != len(classes):
        raise ValueError(f"score matrix must be N x {len(classes)}, got {matrix.shape}")
    if matrix.shape[0] != len(truths):
        raise LengthMismatch(f"{matrix.shape[0]} score rows vs {len(truths)} truths")
    known = set(classes)
    for truth in truths:
        if truth not in known:
            raise UnknownLabel(f"truth {truth!r} not in class list")
    aucs = []
    for k, label in enumerate(classes):
        positives = [truth == label for truth in truths]
        aucs.append(roc_auc(matrix[:, k], positives))
    return float(sum(aucs) / len(aucs))


# ---------------------------------------------------------------------------
# Comparison tables


@dataclass(frozen=True)
class MetricsRow:
    """One model's row in a comparison table. Training accuracy is reported
    as supplied (it cannot be recomputed after the fact)."""

    model_name: str
    training_acc: float
    testing_acc: float
    precision: float
    recall: float
    f1: float
    roc_auc: float

    def __post_init__(self) -> None:
        for name in ("training_acc", "testing_acc", "precision", "recall", "f1", "roc_auc"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    @property
    def values(self) -> tuple[float, ...]:
        return (
            self.training_acc,
            self.testing_acc,
            self.precision,
            self.recall,
            self.f1,
            self.roc_auc,
        )


METRIC_HEADERS = (
    "Training Acc.",
    "Testing Acc.",
    "Precision",
    "Recall",
    "F1-Score",
    "ROC-AUC",
)


def render_comparison(rows: Sequence[MetricsRow], title: str) -> str:
    """Fixed-width comparison table; every per-column maximum is starred.

    Ties all get the star, matching the convention of highlighting the best
    value(s) per metric. Precision/recall/F1 are macro averages, noted in the
    footer so the table is self-describing.
    """
    if not rows:
        raise ValueError("rows must be nonempty")
    maxima = [max(row.values[i] for row in rows) for i in range(len(METRIC_HEADERS))]
    cells: list[list[str]] = []
    for row in rows:
        rendered = [row.model_name]
        for i, value in enumerate(row.values):
            mark = abs(value - maxima[i]) < 1e-12
            rendered.append(f"*{value:.4f}*" if mark else f"{value:.4f}")
        cells.append(rendered)
    headers = ["Model", *METRIC_HEADERS]
    widths = [len(h) for h in headers]
    for line in cells:
        for c, cell in enumerate(line):
            widths[c] = max(widths[c], len(cell))

    def fmt(line: list[str]) -> str:
        name = line[0].ljust(widths[0])
        rest = [cell.rjust(widths[c + 1]) for c, cell in enumerate(line[1:])]
        return "  ".join([name, *rest]).rstrip()

    header_line = fmt(headers)
    out = [title, header_line, "-" * len(header_line)]
    out.extend(fmt(line) for line in cells)
    out.append("* best value per column; precision/recall/F1 are macro averages")
    return "\n".join(out) + "\n"


def export_csv(rows: Sequence[MetricsRow]) -> str:
    """CSV comparison export with the standard metric column names."""
    if not rows:
        raise ValueError("rows must be nonempty")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["Model", *METRIC_HEADERS])
    for row in rows:
        writer.writerow([row.model_name, *(f"{v:.4f}" for v in row.values)])
    return buffer.getvalue()


def parse_rows_csv(text: str) -> list[MetricsRow]:
    """Read MetricsRow entries from CSV with the export_csv column layout."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV") from None
    expected = ["Model", *METRIC_HEADERS]
    if [h.strip() for h in header] != expected:
        raise ValueError(f"CSV header must be {','.join(expected)!r}")
    rows = []
    for line_no, record in enumerate(reader, start=2):
        if not record or not any(field.strip() for field in record):
            continue
        if len(record) != 7:
            raise ValueError(f"line {line_no}: expected 7 fields, got {len(record)}")
        try:
            rows.append(MetricsRow(record[0].strip(), *(float(v) for v in record[1:])))
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
    return rows
