"""Locally adaptive weighted averaging of repetition stacks.

Each pixel of each repetition is scored by how far its local patch mean
deviates from a robust per-pixel reference (the median of patch means over
a trusted subset of repetitions). Deviations are measured against a
per-pixel tolerance (the median of patch standard deviations) and mapped
through a smooth rectangular window, so pixels whose deviation is
explainable by noise keep full weight while dropout regions are
suppressed. Normalized weights sum to one per pixel, making the weighted
sum directly comparable to a uniform average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.special import expit

from .container import RepetitionStack
from .errors import ParameterError, ValidationError
from .reference import ReferenceSubset

DEFAULT_PATCH_SIZE = 5
DEFAULT_TOLERANCE_FACTOR = 1.0
DEFAULT_STEEPNESS = 5.0

# A tolerance below this fraction of the slice's 98th-percentile intensity
# carries no usable noise estimate; such pixels fall back to uniform weights.
DEGENERATE_TOLERANCE_SCALE = 1e-12

# Unnormalized weight sums below this are treated as all-rejected (e.g. zero
# steepness) and fall back to uniform weights.
DEGENERATE_WEIGHT_SUM = 1e-12


@dataclass(frozen=True)
class AwaParams:
    """Hyperparameters of the adaptive weighting.

    patch_size: odd side length of the square analysis patch.
    tolerance_factor: scales the tolerated deviation relative to the local
        noise estimate (wider window for larger values).
    steepness: controls how sharply weights drop once the deviation leaves
        the tolerated band; 0 disables weighting entirely (uniform average).
    """

    patch_size: int = DEFAULT_PATCH_SIZE
    tolerance_factor: float = DEFAULT_TOLERANCE_FACTOR
    steepness: float = DEFAULT_STEEPNESS

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ParameterError(f"patch_size must be odd and >= 1, got {self.patch_size}")
        if not self.tolerance_factor > 0:
            raise ParameterError(f"tolerance_factor must be > 0, got {self.tolerance_factor}")
        if self.steepness < 0:
            raise ParameterError(f"steepness must be >= 0, got {self.steepness}")


@dataclass(frozen=True)
class PatchStats:
    """Per-pixel, per-repetition local mean and standard deviation."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 3:
            raise ValidationError("mu and sigma must share one (n, rows, cols) shape")
        if np.any(self.sigma < 0):
            raise ValidationError("sigma must be non-negative")


@dataclass(frozen=True)
class ReferenceFields:
    """Per-pixel reference value and deviation tolerance."""

    m: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        if self.m.shape != self.s.shape or self.m.ndim != 2:
            raise ValidationError("m and s must share one (rows, cols) shape")
        if np.any(self.s < 0):
            raise ValidationError("tolerance must be non-negative")


@dataclass(frozen=True)
class WeightMaps:
    """Normalized per-pixel, per-repetition contribution weights.

    Weights are non-negative and sum to one over the repetition axis at
    every pixel (within 1e-6).
    """

    w: np.ndarray

    def __post_init__(self):
        if self.w.ndim != 3:
            raise ValidationError(f"weight maps must be (n, rows, cols), got {self.w.shape}")
        if np.any(self.w < 0):
            raise ValidationError("weights must be non-negative")
        sums = self.w.sum(axis=0)
        if not np.allclose(sums, 1.0, atol=1e-6):
            worst = float(np.abs(sums - 1.0).max())
            raise ValidationError(f"per-pixel weight sums deviate from 1 by up to {worst:.3g}")

    @property
    def n_reps(self) -> int:
        return self.w.shape[0]


def patch_stats(stack: RepetitionStack, patch_size: int) -> PatchStats:
    """Sliding-window mean and standard deviation around every pixel.

    Uses a separable mean filter with replicated edges, which is exactly
    the patch mean / population standard deviation of the clipped-index
    neighborhood. ``patch_size`` must be odd and no larger than either
    image dimension.
    """
    if patch_size < 1 or patch_size % 2 == 0:
        raise ParameterError(f"patch size must be odd and >= 1, got {patch_size}")
    rows, cols = stack.shape
    if patch_size > min(rows, cols):
        raise ParameterError(
            f"patch size {patch_size} exceeds image dimensions {rows}x{cols}"
        )
    data = stack.data.astype(np.float64)
    size = (1, patch_size, patch_size)
    mu = uniform_filter(data, size=size, mode="nearest")
    mu_sq = uniform_filter(data * data, size=size, mode="nearest")
    # float cancellation can leave tiny negative variances on flat patches
    var = np.maximum(mu_sq - mu * mu, 0.0)
    return PatchStats(mu=mu, sigma=np.sqrt(var))


def reference_fields(stats: PatchStats, subset: ReferenceSubset) -> ReferenceFields:
    """Per-pixel medians of patch means and standard deviations.

    Only repetitions selected by ``subset`` contribute; an even number of
    selected repetitions yields the midpoint of the two central order
    statistics.
    """
    selected = subset.selected
    if len(selected) != stats.mu.shape[0]:
        raise ValidationError(
            f"subset covers {len(selected)} repetitions, stats have {stats.mu.shape[0]}"
        )
    if not selected.any():
        raise ParameterError("reference subset selects no repetitions")
    return ReferenceFields(
        m=np.median(stats.mu[selected], axis=0),
        s=np.median(stats.sigma[selected], axis=0),
    )


def weight_function(deviation, tolerance, params: AwaParams):
    """Smooth rectangular window scoring a deviation against a tolerance.

    Built from two opposed logistic steps centered at +-(tolerance_factor
    * tolerance); even in the deviation, maximal at zero deviation with
    value tanh(steepness / 2), and approaching zero for deviations far
    outside the tolerated band. The caller must keep ``tolerance`` strictly
    positive (degenerate pixels are handled by :func:`awa_weights`).
    """
    deviation = np.asarray(deviation, dtype=np.float64)
    half_width = params.tolerance_factor * np.asarray(tolerance, dtype=np.float64)
    rate = params.steepness / np.abs(half_width)
    return expit(rate * (deviation + half_width)) - expit(rate * (deviation - half_width))


def awa_weights(
    stack: RepetitionStack,
    subset: ReferenceSubset,
    params: AwaParams = AwaParams(),
) -> WeightMaps:
    """Estimate normalized weight maps for one repetition stack.

    Parameters
    ----------
    stack : RepetitionStack
        Registered repetitions of one slice.
    subset : ReferenceSubset
        Repetitions trusted for the median reference/tolerance. Weights
        are still produced for *all* repetitions.
    params : AwaParams
        Patch size, tolerance factor and steepness.

    Returns
    -------
    WeightMaps
        Non-negative maps summing to one per pixel. Pixels with a
        degenerate tolerance (flat neighborhood) or a vanishing weight sum
        (everything rejected, e.g. steepness 0) fall back to uniform
        weights 1/N.
    """
    stats = patch_stats(stack, params.patch_size)
    ref = reference_fields(stats, subset)

    n = stack.n_reps
    intensity_scale = float(np.percentile(stack.data, 98))
    tol_floor = DEGENERATE_TOLERANCE_SCALE * intensity_scale
    usable = ref.s > tol_floor

    deviation = stats.mu - ref.m[np.newaxis]
    safe_s = np.where(usable, ref.s, 1.0)
    raw = weight_function(deviation, safe_s[np.newaxis], params)

    total = raw.sum(axis=0)
    degenerate = ~usable | (total < DEGENERATE_WEIGHT_SUM)
    safe_total = np.where(degenerate, 1.0, total)
    w = np.where(degenerate[np.newaxis], 1.0 / n, raw / safe_total[np.newaxis])
    return WeightMaps(w=w)


def uniform_weights(n_reps: int, shape: tuple[int, int]) -> WeightMaps:
    """Explicit 1/N maps, so downstream noise analysis is method-agnostic."""
    if n_reps < 1:
        raise ParameterError("need at least one repetition")
    return WeightMaps(w=np.full((n_reps, *shape), 1.0 / n_reps))


def weighted_average(stack: RepetitionStack, weights: WeightMaps) -> np.ndarray:
    """Pixel-wise weighted sum of repetitions under normalized weights."""
    if weights.w.shape != stack.data.shape:
        raise ValidationError(
            f"weight maps {weights.w.shape} do not match stack {stack.data.shape}"
        )
    return np.sum(weights.w * stack.data.astype(np.float64), axis=0)
