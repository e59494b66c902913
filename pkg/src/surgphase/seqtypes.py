"""Plain data carriers passed between pipeline stages.

This module is deliberately free of imports from the numerical modules so
that the independent verification oracles can build and compare these
values without touching any optimized code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

FEATURE_ROLES = ("e", "s", "l", "g")
ROLE_NAMES = {
    "e": "frame embedding",
    "s": "short-range feature",
    "l": "long-range feature",
    "g": "global feature",
}


@dataclass
class FeatureSequence:
    """A contiguous run of per-frame feature rows.

    ``start_frame`` is the 1-based index of the first row; row ``i`` holds
    the feature for frame ``start_frame + i``.  ``start_frame`` 0 is
    reserved for the synthetic all-zero row used as the auxiliary branch
    before any real history exists.
    """

    role: str
    start_frame: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.role not in FEATURE_ROLES:
            raise ShapeError(f"unknown feature role {self.role!r}")
        array = np.asarray(self.data, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise ShapeError(
                f"feature data must be a non-empty 2-D array, got shape {array.shape}"
            )
        if self.start_frame < 0:
            raise ShapeError(f"start_frame must be >= 0, got {self.start_frame}")
        self.data = array

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self) - 1

    def frames(self) -> np.ndarray:
        """Absolute frame index of every row."""
        return np.arange(self.start_frame, self.start_frame + len(self), dtype=np.int64)

    def tail(self, count: int) -> "FeatureSequence":
        """The last ``count`` rows (all rows when fewer exist)."""
        if count < 1:
            raise ShapeError(f"tail length must be >= 1, got {count}")
        keep = min(count, len(self))
        return FeatureSequence(
            role=self.role,
            start_frame=self.end_frame - keep + 1,
            data=self.data[len(self) - keep :],
        )


@dataclass(frozen=True, eq=False)
class PhaseOutput:
    """Per-frame result of the recognition head.

    ``predicted_phase`` is the argmax of ``logits`` (lowest index wins a
    tie) and ``confidence`` is the softmax probability of that phase.
    ``heat`` is the transition-proximity score in [0, 1].
    """

    frame: int
    logits: np.ndarray
    heat: float
    predicted_phase: int
    confidence: float

    @classmethod
    def from_logits(cls, frame: int, logits: np.ndarray, heat: float) -> "PhaseOutput":
        row = np.asarray(logits, dtype=np.float64)
        if row.ndim != 1 or row.size < 2:
            raise ShapeError(f"logits must be a 1-D array of >= 2 scores, got shape {row.shape}")
        predicted = int(np.argmax(row))
        shifted = row - row[predicted]
        confidence = 1.0 / float(np.sum(np.exp(shifted)))
        return cls(
            frame=int(frame),
            logits=row.copy(),
            heat=float(heat),
            predicted_phase=predicted,
            confidence=confidence,
        )

    def bit_equal(self, other: "PhaseOutput") -> bool:
        """Exact equality, bit-for-bit on every float field."""
        return (
            self.frame == other.frame
            and self.predicted_phase == other.predicted_phase
            and self.logits.shape == other.logits.shape
            and bool(np.all(self.logits == other.logits))
            and _float_bits(self.heat) == _float_bits(other.heat)
            and _float_bits(self.confidence) == _float_bits(other.confidence)
        )


def _float_bits(value: float) -> int:
    return int.from_bytes(np.float64(value).tobytes(), "little")


def max_output_difference(a: PhaseOutput, b: PhaseOutput) -> float:
    """Largest absolute difference across all float fields (for reports)."""
    if a.logits.shape != b.logits.shape:
        return math.inf
    diffs = [
        float(np.max(np.abs(a.logits - b.logits))) if a.logits.size else 0.0,
        abs(a.heat - b.heat),
        abs(a.confidence - b.confidence),
    ]
    return max(diffs)
