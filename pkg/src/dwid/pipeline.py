"""The four averaging methods and the ground-truth / input-subset protocol.

uniform   equal weights over all repetitions
awa       adaptive weighting, reference computed on all repetitions
cd        classify-and-discard: plain average of the trusted subset only
dlawa     adaptive weighting, reference restricted to the trusted subset

All methods return their effective weight maps alongside the averaged
image so noise analysis needs no per-method special-casing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .container import LABEL_CLEAN, RepetitionStack, SliceSet
from .errors import ParameterError, ValidationError
from .reference import ReferenceSubset, all_repetitions
from .weighting import AwaParams, WeightMaps, awa_weights, uniform_weights, weighted_average

METHOD_UNIFORM = "uniform"
METHOD_AWA = "awa"
METHOD_CD = "cd"
METHOD_DLAWA = "dlawa"
METHODS = (METHOD_UNIFORM, METHOD_AWA, METHOD_CD, METHOD_DLAWA)


@dataclass(frozen=True)
class MethodSpec:
    """An averaging method plus whatever it needs to run.

    ``reference`` is required for cd/dlawa and ignored by uniform/awa
    (awa always uses all repetitions as its reference subset).
    """

    method: str
    awa_params: AwaParams = field(default_factory=AwaParams)
    reference: ReferenceSubset | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in (METHOD_CD, METHOD_DLAWA) and self.reference is None:
            raise ValidationError(f"method {self.method!r} requires a reference subset")


def _cd_weights(stack: RepetitionStack, subset: ReferenceSubset) -> WeightMaps:
    if len(subset.selected) != stack.n_reps:
        raise ValidationError(
            f"subset covers {len(subset.selected)} repetitions, stack has {stack.n_reps}"
        )
    per_rep = subset.selected.astype(np.float64) / subset.n_selected
    w = np.broadcast_to(per_rep[:, None, None], stack.data.shape).copy()
    return WeightMaps(w=w)


def run_method(slice_set: SliceSet, spec: MethodSpec) -> tuple[np.ndarray, WeightMaps]:
    """Average the high-b stack with one method; returns (image, weights)."""
    stack = slice_set.high_b
    if spec.method == METHOD_UNIFORM:
        maps = uniform_weights(stack.n_reps, stack.shape)
    elif spec.method == METHOD_AWA:
        maps = awa_weights(stack, all_repetitions(stack.n_reps), spec.awa_params)
    elif spec.method == METHOD_DLAWA:
        maps = awa_weights(stack, spec.reference, spec.awa_params)
    else:  # cd
        maps = _cd_weights(stack, spec.reference)
    return weighted_average(stack, maps), maps


def make_ground_truth(slice_set: SliceSet) -> np.ndarray:
    """Plain average of the repetitions labeled clean."""
    stack = slice_set.high_b
    if stack.labels is None:
        raise ValidationError("ground truth requires labels")
    clean = np.array([lab == LABEL_CLEAN for lab in stack.labels], dtype=bool)
    if not clean.any():
        raise ValidationError("no repetition is labeled clean; ground truth undefined")
    return stack.data[clean].astype(np.float64).mean(axis=0)


def subset_indices(n: int, n0: int, seed: int) -> np.ndarray:
    """Seeded uniform draw of n0 distinct repetition indices, in stack order."""
    if not 1 <= n0 <= n:
        raise ParameterError(f"subset size {n0} not in [1, {n}]")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=n0, replace=False))


def make_input_subset(slice_set: SliceSet, n0: int, seed: int) -> SliceSet:
    """Random input set of n0 high-b repetitions (labels carried along)."""
    idx = subset_indices(slice_set.high_b.n_reps, n0, seed)
    return take_repetitions(slice_set, idx)


def take_repetitions(slice_set: SliceSet, idx: np.ndarray) -> SliceSet:
    """Slice set restricted to the given high-b repetition indices."""
    stack = slice_set.high_b
    labels = None
    if stack.labels is not None:
        labels = tuple(stack.labels[i] for i in idx)
    high = RepetitionStack(stack.data[idx], stack.b_value, labels)
    return SliceSet(slice_set.low_b, high, slice_set.roi)
