"""Evaluation harness: ROC/AUC, threshold pick, scores, binned tables."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import LABEL_CORRUPT, VALID_LABELS
from .errors import ValidationError

BIN_WIDTH = 10.0


def _positives(labels) -> np.ndarray:
    labels = list(labels)
    for lab in labels:
        if lab not in VALID_LABELS:
            raise ValidationError(f"unknown label {lab!r}")
    return np.array([lab == LABEL_CORRUPT for lab in labels], dtype=bool)


def roc_curve(probs, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC points over all distinct score thresholds; corrupt is positive.

    A repetition is called positive when its score is >= the threshold.
    Returns (fpr, tpr, thresholds) with a leading (0, 0) sentinel at
    threshold +inf, ending at (1, 1) for the lowest score.
    """
    probs = np.asarray(probs, dtype=np.float64)
    pos = _positives(labels)
    if probs.shape != pos.shape or probs.size == 0:
        raise ValidationError("probs and labels must be equally sized and non-empty")

    thresholds = np.concatenate(([np.inf], np.unique(probs)[::-1]))
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    tpr = np.empty(len(thresholds))
    fpr = np.empty(len(thresholds))
    for i, thr in enumerate(thresholds):
        called = probs >= thr
        tp = int((called & pos).sum())
        fp = int((called & ~pos).sum())
        tpr[i] = tp / n_pos if n_pos else 0.0
        fpr[i] = fp / n_neg if n_neg else 0.0
    return fpr, tpr, thresholds


def roc_auc(probs, labels) -> float:
    """Area under the ROC curve; needs both classes to be present."""
    pos = _positives(labels)
    if pos.all() or not pos.any():
        raise ValidationError("AUC is undefined with a single class")
    fpr, tpr, _ = roc_curve(probs, labels)
    return float(np.trapezoid(tpr, fpr))


def select_threshold(roc: tuple[np.ndarray, np.ndarray, np.ndarray]) -> float:
    """Threshold maximizing TPR - FPR; ties go to the higher threshold."""
    fpr, tpr, thresholds = roc
    finite = np.isfinite(thresholds)
    j = tpr[finite] - fpr[finite]
    thr = thresholds[finite]
    best = np.flatnonzero(j == j.max())
    return float(thr[best].max())


@dataclass(frozen=True)
class Scores:
    """Confusion-matrix summary; undefined ratios are None, never 0."""

    accuracy: float
    sensitivity: float | None
    specificity: float | None
    precision: float | None


def classification_scores(preds, labels) -> Scores:
    """Standard scores for binary calls against labels (corrupt positive)."""
    preds = np.asarray(preds, dtype=bool)
    pos = _positives(labels)
    if preds.shape != pos.shape or preds.size == 0:
        raise ValidationError("preds and labels must be equally sized and non-empty")
    tp = int((preds & pos).sum())
    tn = int((~preds & ~pos).sum())
    fp = int((preds & ~pos).sum())
    fn = int((~preds & pos).sum())

    def ratio(num, den):
        return num / den if den else None

    return Scores(
        accuracy=(tp + tn) / preds.size,
        sensitivity=ratio(tp, tp + fn),
        specificity=ratio(tn, tn + fp),
        precision=ratio(tp, tp + fp),
    )


@dataclass(frozen=True)
class BinStat:
    bin_low: float
    bin_high: float
    method: str
    mean: float
    std: float
    n: int


def bin_index(ratio: float) -> int:
    """Bin of a dropout ratio: left-closed 10%-wide bins, [90, 100] closed."""
    if not 0.0 <= ratio <= 100.0 or not math.isfinite(ratio):
        raise ValidationError(f"dropout ratio {ratio} outside [0, 100]")
    return min(int(ratio // BIN_WIDTH), 9)


def binned_analysis(records) -> list[BinStat]:
    """Per-(bin, method) mean/std of (dropout_ratio, method, value) records.

    Bins partition the records exactly; the standard deviation is the
    population form (a single record gives std 0).
    """
    groups: dict[tuple[int, str], list[float]] = {}
    for ratio, method, value in records:
        groups.setdefault((bin_index(float(ratio)), str(method)), []).append(float(value))
    stats = []
    for (idx, method), values in sorted(groups.items()):
        arr = np.asarray(values, dtype=np.float64)
        stats.append(
            BinStat(
                bin_low=idx * BIN_WIDTH,
                bin_high=(idx + 1) * BIN_WIDTH,
                method=method,
                mean=float(arr.mean()),
                std=float(arr.std()),
                n=len(values),
            )
        )
    return stats


def write_binned_csv(stats: list[BinStat], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "method", "mean", "std", "n"])
        for s in stats:
            writer.writerow([s.bin_low, s.bin_high, s.method, repr(s.mean), repr(s.std), s.n])


def write_roc_csv(roc: tuple[np.ndarray, np.ndarray, np.ndarray], path: Path | str) -> None:
    fpr, tpr, thresholds = roc
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr", "threshold"])
        for f, t, thr in zip(fpr, tpr, thresholds):
            writer.writerow([repr(float(f)), repr(float(t)), repr(float(thr))])


def write_summary_json(summary: dict, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
