"""Quantitative derivations: ADC maps, dropout ratio, analytic noise maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import Roi
from .errors import ParameterError, ValidationError
from .weighting import WeightMaps


@dataclass(frozen=True)
class AdcMap:
    """Per-pixel apparent diffusion coefficient in mm^2/s.

    ``mask`` marks pixels where the two-point fit is defined (both signals
    strictly positive); ``values`` is zero outside the mask.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise ValidationError("values and mask must share one (rows, cols) shape")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValidationError("ADC values must be finite where the fit is defined")


@dataclass(frozen=True)
class NoiseMap:
    """Noise amplification relative to uniform averaging (dimensionless).

    For normalized non-negative weights the value is >= 1 everywhere, with
    equality exactly for uniform weights.
    """

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValidationError(f"noise map must be 2-D, got shape {self.values.shape}")
        if np.any(self.values < 1.0 - 1e-9):
            raise ValidationError("relative noise cannot fall below 1 for normalized weights")


def adc_map(low: np.ndarray, high: np.ndarray, b_low: float, b_high: float) -> AdcMap:
    """Two-point mono-exponential fit ADC = ln(low/high) / (b_high - b_low).

    With exactly two b-values the least-squares exponential fit reduces to
    this log-ratio. Pixels with a non-positive signal in either image are
    masked out rather than clamped.
    """
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    if low.shape != high.shape or low.ndim != 2:
        raise ValidationError(f"image shapes differ: {low.shape} vs {high.shape}")
    if not b_high > b_low:
        raise ParameterError(f"b_high ({b_high}) must exceed b_low ({b_low})")
    mask = (low > 0) & (high > 0)
    ratio = np.where(mask, low / np.where(mask, high, 1.0), 1.0)
    values = np.where(mask, np.log(ratio) / (b_high - b_low), 0.0)
    return AdcMap(values=values, mask=mask)


def dropout_ratio(n0: int, n: int) -> float:
    """Percentage of corrupted repetitions: 100 * (1 - n0/n)."""
    if n < 1 or not 0 <= n0 <= n:
        raise ParameterError(f"need 0 <= n0 <= n with n >= 1, got n0={n0}, n={n}")
    return 100.0 * (n - n0) / n


def relative_noise_map(weights: WeightMaps) -> NoiseMap:
    """Analytic noise amplification sqrt(N * sum_n w_n^2) per pixel.

    Assumes equal-variance zero-mean Gaussian noise across repetitions, so
    the weighted sum's standard deviation scales with the L2 norm of the
    weights; the uniform average (1/sqrt(N) of a single repetition's noise)
    is the reference level. Computed from the weights alone, never
    estimated from the data.
    """
    n = weights.n_reps
    return NoiseMap(values=np.sqrt(n * np.sum(weights.w**2, axis=0)))


def roi_mean(source: AdcMap | np.ndarray, roi: Roi) -> float:
    """Mean over a rectangular ROI; for ADC maps only defined pixels count."""
    if isinstance(source, AdcMap):
        values = source.values
        valid = source.mask
    else:
        values = np.asarray(source, dtype=np.float64)
        valid = np.ones(values.shape, dtype=bool)
    if not roi.within(values.shape):
        raise ValidationError(f"ROI {roi} exceeds image bounds {values.shape}")
    sl = roi.slices()
    region_valid = valid[sl]
    if not region_valid.any():
        raise ValidationError("ROI contains no valid pixels")
    return float(values[sl][region_valid].mean())
