"""Data model and on-disk container format for repetition stacks.

A *stack* is the set of N registered magnitude images of one slice at one
b-value. On disk a stack is a pair of files sharing a base name:

``<name>.json``
    sidecar with ``format_version`` (=1), ``rows``, ``cols``, ``n_reps``,
    ``b_value`` and an optional ``labels`` array of ``"clean"`` /
    ``"corrupt"`` / ``"unknown"`` strings (one per repetition).
``<name>.f32``
    raw pixel payload, 32-bit little-endian floats, repetition-major,
    row-major within each image.

A *slice set* pairs the low- and high-b stacks of one slice and is stored
as a directory::

    <dir>/low/stack.json   <dir>/low/stack.f32
    <dir>/high/stack.json  <dir>/high/stack.f32
    <dir>/roi.json         (optional: row0, col0, height, width)

All types are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    MalformedHeaderError,
    NonFinitePixelError,
    UnknownFormatVersionError,
    ValidationError,
)

FORMAT_VERSION = 1
STACK_BASENAME = "stack"

LABEL_CLEAN = "clean"
LABEL_CORRUPT = "corrupt"
LABEL_UNKNOWN = "unknown"
VALID_LABELS = (LABEL_CLEAN, LABEL_CORRUPT, LABEL_UNKNOWN)


def _as_image_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValidationError(
            f"stack data must be (n_reps, rows, cols) with n_reps >= 1, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonFinitePixelError("stack contains NaN or infinite pixel values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RepetitionStack:
    """N same-sized magnitude images of one slice at one b-value.

    ``data`` has shape (n_reps, rows, cols) and float32 dtype; ``labels``,
    when present, marks each repetition clean/corrupt/unknown.
    """

    data: np.ndarray
    b_value: float
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "data", _as_image_array(self.data))
        object.__setattr__(self, "b_value", float(self.b_value))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.n_reps:
                raise ValidationError(
                    f"got {len(labels)} labels for {self.n_reps} repetitions"
                )
            for lab in labels:
                if lab not in VALID_LABELS:
                    raise ValidationError(f"unknown repetition label {lab!r}")
            object.__setattr__(self, "labels", labels)

    @property
    def n_reps(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) of each image."""
        return self.data.shape[1:]

    def with_labels(self, labels) -> "RepetitionStack":
        return RepetitionStack(self.data, self.b_value, tuple(labels))


@dataclass(frozen=True)
class Roi:
    """Rectangular region of interest in image coordinates."""

    row0: int
    col0: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.row0 < 0 or self.col0 < 0:
            raise ValidationError(f"degenerate ROI {self}")

    def slices(self) -> tuple[slice, slice]:
        return (
            slice(self.row0, self.row0 + self.height),
            slice(self.col0, self.col0 + self.width),
        )

    def within(self, shape: tuple[int, int]) -> bool:
        return self.row0 + self.height <= shape[0] and self.col0 + self.width <= shape[1]


@dataclass(frozen=True)
class SliceSet:
    """Low- and high-b stacks of one slice plus an optional ROI."""

    low_b: RepetitionStack
    high_b: RepetitionStack
    roi: Roi | None = None

    def __post_init__(self):
        if not self.low_b.b_value < self.high_b.b_value:
            raise ValidationError(
                f"low b-value ({self.low_b.b_value}) must be below high ({self.high_b.b_value})"
            )
        if self.roi is not None:
            for stack in (self.low_b, self.high_b):
                if not self.roi.within(stack.shape):
                    raise ValidationError(
                        f"ROI {self.roi} exceeds image bounds {stack.shape}"
                    )


def write_repetition_stack(stack: RepetitionStack, base: Path | str) -> None:
    """Write one stack as ``<base>.json`` + ``<base>.f32``."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    n, rows, cols = stack.data.shape
    header = {
        "format_version": FORMAT_VERSION,
        "rows": rows,
        "cols": cols,
        "n_reps": n,
        "b_value": stack.b_value,
    }
    if stack.labels is not None:
        header["labels"] = list(stack.labels)
    base.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")
    base.with_suffix(".f32").write_bytes(np.ascontiguousarray(stack.data, dtype="<f4").tobytes())


def read_repetition_stack(base: Path | str) -> RepetitionStack:
    """Read one stack from ``<base>.json`` + ``<base>.f32``."""
    base = Path(base)
    header_path = base.with_suffix(".json")
    payload_path = base.with_suffix(".f32")
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{header_path}: invalid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise MalformedHeaderError(f"{header_path}: header must be a JSON object")

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise UnknownFormatVersionError(
            f"{header_path}: format_version {version!r} not supported (expected {FORMAT_VERSION})"
        )
    try:
        rows = int(header["rows"])
        cols = int(header["cols"])
        n_reps = int(header["n_reps"])
        b_value = float(header["b_value"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"{header_path}: missing or invalid key ({exc})") from exc
    if rows < 1 or cols < 1 or n_reps < 1:
        raise MalformedHeaderError(
            f"{header_path}: rows/cols/n_reps must be positive, got {rows}x{cols}x{n_reps}"
        )

    raw = payload_path.read_bytes()
    expected = n_reps * rows * cols * 4
    if len(raw) != expected:
        raise DimensionMismatchError(
            f"{payload_path}: payload is {len(raw)} bytes, header implies {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(n_reps, rows, cols)
    if not np.all(np.isfinite(data)):
        raise NonFinitePixelError(f"{payload_path}: payload contains non-finite pixels")

    labels = header.get("labels")
    if labels is not None:
        labels = tuple(labels)
    return RepetitionStack(data, b_value, labels)


def write_stack(slice_set: SliceSet, path: Path | str) -> None:
    """Write a slice set container directory (see module docstring)."""
    path = Path(path)
    write_repetition_stack(slice_set.low_b, path / "low" / STACK_BASENAME)
    write_repetition_stack(slice_set.high_b, path / "high" / STACK_BASENAME)
    roi_path = path / "roi.json"
    if slice_set.roi is not None:
        roi = slice_set.roi
        roi_path.write_text(
            json.dumps(
                {"row0": roi.row0, "col0": roi.col0, "height": roi.height, "width": roi.width}
            )
            + "\n"
        )
    elif roi_path.exists():
        roi_path.unlink()


def read_stack(path: Path | str) -> SliceSet:
    """Read and validate a slice set container directory."""
    path = Path(path)
    low = read_repetition_stack(path / "low" / STACK_BASENAME)
    high = read_repetition_stack(path / "high" / STACK_BASENAME)
    roi = None
    roi_path = path / "roi.json"
    if roi_path.exists():
        try:
            fields = json.loads(roi_path.read_text())
            roi = Roi(int(fields["row0"]), int(fields["col0"]),
                      int(fields["height"]), int(fields["width"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedHeaderError(f"{roi_path}: invalid ROI file ({exc})") from exc
    return SliceSet(low, high, roi)


def is_slice_set_dir(path: Path | str) -> bool:
    """True if *path* looks like a slice set container."""
    path = Path(path)
    return (path / "high" / f"{STACK_BASENAME}.json").is_file()
