"""Selection of the repetitions trusted for reference computation.

A :class:`ReferenceSubset` can come from ground-truth labels, from an
external classifier's exported probabilities, from the built-in
statistical baseline classifier, or from an explicit user mask (e.g. the
repetitions of one respiratory motion state). An empty selection never
aborts processing: it falls back to all repetitions with a flag, after
which the weighting degrades gracefully to its unguided form.

Prediction interchange file (JSON, one per slice)::

    {"format_version": 1, "n_reps": N, "probs": [...], "threshold": t}

Explicit mask file (JSON)::

    {"format_version": 1, "n_reps": N, "selected": [true, false, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .container import LABEL_CLEAN, LABEL_UNKNOWN, RepetitionStack, SliceSet
from .errors import MalformedHeaderError, UnknownFormatVersionError, ValidationError

ORIGIN_LABELS = "labels"
ORIGIN_PREDICTIONS = "external_predictions"
ORIGIN_BASELINE = "baseline_classifier"
ORIGIN_MASK = "explicit_mask"
ORIGIN_ALL = "all"
ORIGINS = (ORIGIN_LABELS, ORIGIN_PREDICTIONS, ORIGIN_BASELINE, ORIGIN_MASK, ORIGIN_ALL)

# Baseline classifier constants: a pixel counts as dropped out when it falls
# below half the pixel-wise median across repetitions; the per-repetition
# fraction of such foreground pixels is squashed so that a 10% fraction maps
# to probability 0.5. These are a documented stand-in for a trained model.
BASELINE_DROP_FACTOR = 0.5
BASELINE_SCORE_MIDPOINT = 0.1
BASELINE_SCORE_SLOPE = 20.0
BASELINE_THRESHOLD = 0.5


@dataclass(frozen=True)
class ReferenceSubset:
    """Boolean selection over the repetitions of one stack."""

    selected: np.ndarray
    origin: str
    fallback: bool = False

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=bool)
        if sel.ndim != 1 or sel.size < 1:
            raise ValidationError("selection must be a non-empty boolean vector")
        if not sel.any():
            raise ValidationError("selection must keep at least one repetition")
        if self.origin not in ORIGINS:
            raise ValidationError(f"unknown subset origin {self.origin!r}")
        sel.flags.writeable = False
        object.__setattr__(self, "selected", sel)

    @property
    def n_selected(self) -> int:
        return int(self.selected.sum())


@dataclass(frozen=True)
class PredictionRecord:
    """Per-repetition corruption probabilities plus an operating threshold."""

    probs: np.ndarray
    threshold: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 1:
            raise ValidationError("probs must be a non-empty vector")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
            raise ValidationError("probs must lie in [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"threshold must lie in [0, 1], got {self.threshold}")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "threshold", float(self.threshold))


def all_repetitions(n: int) -> ReferenceSubset:
    return ReferenceSubset(np.ones(n, dtype=bool), ORIGIN_ALL)


def _finalize(selected: np.ndarray, origin: str, n: int) -> ReferenceSubset:
    if selected.any():
        return ReferenceSubset(selected, origin)
    return ReferenceSubset(np.ones(n, dtype=bool), origin, fallback=True)


def subset_from_labels(stack: RepetitionStack) -> ReferenceSubset:
    """Trust the repetitions labeled clean; all of them if none are."""
    if stack.labels is None:
        raise ValidationError("stack carries no labels")
    if LABEL_UNKNOWN in stack.labels:
        raise ValidationError("labels contain 'unknown' entries; resolve them first")
    selected = np.array([lab == LABEL_CLEAN for lab in stack.labels], dtype=bool)
    return _finalize(selected, ORIGIN_LABELS, stack.n_reps)


def subset_from_predictions(pred: PredictionRecord) -> ReferenceSubset:
    """Trust repetitions predicted clean (probability below the threshold)."""
    selected = pred.probs < pred.threshold
    return _finalize(selected, ORIGIN_PREDICTIONS, len(pred.probs))


def subset_from_mask(selected, n_reps: int | None = None) -> ReferenceSubset:
    """Wrap an explicit user-supplied selection (e.g. one motion state)."""
    selected = np.asarray(selected, dtype=bool)
    if n_reps is not None and selected.size != n_reps:
        raise ValidationError(f"mask covers {selected.size} repetitions, expected {n_reps}")
    return _finalize(selected, ORIGIN_MASK, selected.size)


def _otsu_threshold(image: np.ndarray, bins: int = 256) -> float:
    """Threshold maximizing between-class variance of the intensity histogram."""
    lo = float(image.min())
    hi = float(image.max())
    if not hi > lo:
        raise ValidationError("image is constant; no foreground can be separated")
    counts, edges = np.histogram(image, bins=bins, range=(lo, hi))
    counts = counts.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0
    weight_lo = np.cumsum(counts)
    weight_hi = counts.sum() - weight_lo
    mass = np.cumsum(counts * centers)
    mean_lo = mass / np.where(weight_lo > 0, weight_lo, 1.0)
    mean_hi = (mass[-1] - mass) / np.where(weight_hi > 0, weight_hi, 1.0)
    between = weight_lo * weight_hi * (mean_lo - mean_hi) ** 2
    return float(edges[int(np.argmax(between)) + 1])


def baseline_classifier(slice_set: SliceSet) -> PredictionRecord:
    """Statistical dropout scorer, a self-contained classifier substitute.

    Foreground is taken from the mean low-b image (Otsu threshold); each
    high-b repetition is scored by the fraction of foreground pixels lying
    below half the pixel-wise median across repetitions, then squashed to
    a probability. Deterministic, permutation-equivariant over repetitions
    and invariant to global intensity scaling.
    """
    low_mean = slice_set.low_b.data.astype(np.float64).mean(axis=0)
    foreground = low_mean > _otsu_threshold(low_mean)
    if not foreground.any():
        raise ValidationError("foreground is empty; cannot score repetitions")

    high = slice_set.high_b.data.astype(np.float64)
    median_image = np.median(high, axis=0)
    cutoff = BASELINE_DROP_FACTOR * median_image[foreground]
    scores = (high[:, foreground] < cutoff).mean(axis=1)
    probs = expit(BASELINE_SCORE_SLOPE * (scores - BASELINE_SCORE_MIDPOINT))
    return PredictionRecord(probs=probs, threshold=BASELINE_THRESHOLD)


def write_predictions(pred: PredictionRecord, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": 1,
        "n_reps": len(pred.probs),
        "probs": [float(p) for p in pred.probs],
        "threshold": pred.threshold,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")


def read_predictions(path: Path | str, n_reps: int | None = None) -> PredictionRecord:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{path}: invalid JSON ({exc})") from exc
    if payload.get("format_version") != 1:
        raise UnknownFormatVersionError(
            f"{path}: format_version {payload.get('format_version')!r} not supported"
        )
    try:
        probs = payload["probs"]
        declared = int(payload["n_reps"])
        threshold = float(payload["threshold"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"{path}: missing or invalid key ({exc})") from exc
    if len(probs) != declared:
        raise MalformedHeaderError(
            f"{path}: {len(probs)} probs but n_reps={declared}"
        )
    if n_reps is not None and declared != n_reps:
        raise ValidationError(f"{path}: predictions cover {declared} repetitions, expected {n_reps}")
    return PredictionRecord(probs=np.asarray(probs, dtype=np.float64), threshold=threshold)


def read_mask(path: Path | str, n_reps: int | None = None) -> ReferenceSubset:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{path}: invalid JSON ({exc})") from exc
    if payload.get("format_version") != 1:
        raise UnknownFormatVersionError(
            f"{path}: format_version {payload.get('format_version')!r} not supported"
        )
    try:
        selected = payload["selected"]
        declared = int(payload["n_reps"])
    except (KeyError, TypeError) as exc:
        raise MalformedHeaderError(f"{path}: missing or invalid key ({exc})") from exc
    if len(selected) != declared:
        raise MalformedHeaderError(f"{path}: {len(selected)} entries but n_reps={declared}")
    return subset_from_mask(selected, n_reps)
