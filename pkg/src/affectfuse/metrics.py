"""Confusion matrices, overall accuracy and unweighted average recall."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Mapping

import numpy as np

from .ingest import LABEL_CODES, N_CLASSES, EmotionLabel


class CoverageError(ValueError):
    def __init__(self, missing_preds: list[str], missing_truth: list[str]):
        parts = []
        if missing_preds:
            parts.append(f"no prediction for: {', '.join(missing_preds)}")
        if missing_truth:
            parts.append(f"no ground truth for: {', '.join(missing_truth)}")
        super().__init__("; ".join(parts) or "empty clip set")
        self.missing_preds = missing_preds
        self.missing_truth = missing_truth


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in AN..SU order."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts)
        if c.shape != (N_CLASSES, N_CLASSES) or np.any(c < 0):
            raise ValueError(f"confusion counts must be a nonnegative {N_CLASSES}x{N_CLASSES} matrix")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def class_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


@dataclass(frozen=True)
class MetricsSummary:
    overall_accuracy: float
    unweighted_average: float
    per_class_recall: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "unweighted_average": self.unweighted_average,
            "per_class_recall": dict(zip(LABEL_CODES, self.per_class_recall)),
        }


def confusion(preds: Mapping[str, EmotionLabel], truth: Mapping[str, EmotionLabel]) -> ConfusionMatrix:
    missing_preds = sorted(set(truth) - set(preds))
    missing_truth = sorted(set(preds) - set(truth))
    if missing_preds or missing_truth or not truth:
        raise CoverageError(missing_preds, missing_truth)
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for cid, lab in truth.items():
        counts[int(lab), int(preds[cid])] += 1
    return ConfusionMatrix(counts)


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("overall accuracy is undefined on an empty confusion matrix")
    return int(np.trace(cm.counts)) / cm.total


def metrics(cm: ConfusionMatrix) -> MetricsSummary:
    """Overall accuracy and the mean recall over classes that occur in the truth."""
    overall = overall_accuracy(cm)
    totals = cm.class_totals
    diag = np.diag(cm.counts)
    recall = tuple(float(d / t) if t else 0.0 for d, t in zip(diag, totals))
    present = [r for r, t in zip(recall, totals) if t]
    return MetricsSummary(overall, float(np.mean(present)), recall)


def percentages(cm: ConfusionMatrix) -> np.ndarray:
    """Row percentages rounded half-to-even to 2 decimals; empty rows stay 0."""
    out = np.zeros((N_CLASSES, N_CLASSES))
    q = Decimal("0.01")
    for i, total in enumerate(cm.class_totals):
        if total == 0:
            continue
        for j in range(N_CLASSES):
            pct = (Decimal(int(cm.counts[i, j])) * 100 / Decimal(int(total))).quantize(q, rounding=ROUND_HALF_EVEN)
            out[i, j] = float(pct)
    return out


def counts_from_percentages(pct: np.ndarray, class_totals) -> ConfusionMatrix:
    """Rebuild integer counts from a row-percentage table and known class totals."""
    totals = np.asarray(class_totals, dtype=np.float64)
    return ConfusionMatrix(np.rint(np.asarray(pct) * totals[:, None] / 100.0).astype(np.int64))


def write_confusion_csv(path: str | Path, cm: ConfusionMatrix, as_percent: bool = False) -> None:
    table = percentages(cm) if as_percent else cm.counts
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", *LABEL_CODES])
        for code, row in zip(LABEL_CODES, table):
            w.writerow([code, *(f"{v:.2f}" if as_percent else str(int(v)) for v in row)])


def write_metrics_json(path: str | Path, summary: MetricsSummary) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
