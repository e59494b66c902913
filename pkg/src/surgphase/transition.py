"""Phase-transition supervision: heatmap targets, loss, clip schedule.

A phase boundary is any frame whose label differs from the previous
frame's.  The regression target for transition proximity is built by
dropping an *asymmetric* Gaussian bump on every boundary: rising with
spread ``sigma_left`` over the ``3 * sigma_left`` frames before the
boundary, value exactly 1 at the boundary, and falling with spread
``sigma_right`` over the ``3 * sigma_right`` frames after it.  The
asymmetry reflects that the approach to a transition is abrupt while
its aftermath lingers.  Overlapping bumps combine by maximum; frames
outside every bump are exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .linalg import as_matrix


@dataclass(frozen=True)
class SamplerConfig:
    """Down-sampling schedule for training clips (``alpha`` frames per clip)."""

    alpha: int = 30

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")


@dataclass
class PhaseTrack:
    """Per-frame integer phase labels for one video."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 1 or arr.size < 1:
            raise ShapeError(f"labels must be a non-empty 1-D array, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ShapeError(f"labels must be integers, got dtype {arr.dtype}")
        arr = arr.astype(np.int64)
        if arr.min() < 0:
            raise ShapeError("phase labels must be non-negative")
        self.labels = arr

    def __len__(self) -> int:
        return self.labels.shape[0]

    def boundaries(self) -> np.ndarray:
        """Frames (1-based positions in the array, i.e. indices >= 1) where the label changes."""
        changed = self.labels[1:] != self.labels[:-1]
        return np.flatnonzero(changed) + 1


@dataclass
class TransitionMap:
    """Per-frame transition proximity in [0, 1] with its generating spreads."""

    values: np.ndarray
    sigma_left: float
    sigma_right: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ShapeError("transition map must be a non-empty 1-D array")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("transition map values must lie in [0, 1]")
        self.values = arr

    def __len__(self) -> int:
        return self.values.shape[0]


def build_transition_map(
    track: PhaseTrack, sigma_left: float = 3.0, sigma_right: float = 12.0
) -> TransitionMap:
    """Asymmetric-Gaussian transition target for one label track.

    For boundary ``b``: frames ``t`` with ``b - 3*sigma_left < t < b`` get
    ``exp(-(t-b)^2 / (2*sigma_left^2))``, frame ``b`` gets 1, and frames
    ``b < t < b + 3*sigma_right`` get ``exp(-(t-b)^2 / (2*sigma_right^2))``.
    Supports are open intervals: a frame exactly ``3*sigma`` away is
    outside the bump.  Multiple bumps combine by elementwise maximum.
    """
    if not (sigma_left > 0.0 and math.isfinite(sigma_left)):
        raise ConfigError(f"sigma_left must be finite and > 0, got {sigma_left}")
    if not (sigma_right > 0.0 and math.isfinite(sigma_right)):
        raise ConfigError(f"sigma_right must be finite and > 0, got {sigma_right}")

    total = len(track)
    values = np.zeros(total, dtype=np.float64)
    for b in track.boundaries():
        lo = max(0, b - math.ceil(3.0 * sigma_left))
        left = np.arange(lo, b, dtype=np.int64)
        left = left[left > b - 3.0 * sigma_left]
        if left.size:
            bump = np.exp(-((left - b) ** 2) / (2.0 * sigma_left**2))
            np.maximum(values[left[0] : b], bump, out=values[left[0] : b])
        values[b] = 1.0
        hi = min(total - 1, b + math.ceil(3.0 * sigma_right))
        right = np.arange(b + 1, hi + 1, dtype=np.int64)
        right = right[right < b + 3.0 * sigma_right]
        if right.size:
            bump = np.exp(-((right - b) ** 2) / (2.0 * sigma_right**2))
            np.maximum(values[right[0] : right[-1] + 1], bump, out=values[right[0] : right[-1] + 1])
    return TransitionMap(values=values, sigma_left=sigma_left, sigma_right=sigma_right)


def joint_loss(
    logits,
    heat_pred,
    track: PhaseTrack,
    target: TransitionMap,
    heat_weight: float = 1.0,
) -> float:
    """Mean L1 on the transition heat plus mean cross-entropy on the phases.

    ``logits`` is (frames, phases); cross-entropy is computed from the
    row softmax in a log-sum-exp form that cannot produce infinities for
    finite logits.  ``heat_weight`` scales only the L1 term.
    """
    z = as_matrix(logits, "logits")
    heat = np.asarray(heat_pred, dtype=np.float64)
    if heat.ndim != 1:
        raise ShapeError(f"heat predictions must be 1-D, got {heat.ndim}-D")
    frames = len(track)
    if z.shape[0] != frames or heat.shape[0] != frames or len(target) != frames:
        raise ShapeError(
            f"frame counts disagree: logits {z.shape[0]}, heat {heat.shape[0]}, "
            f"labels {frames}, target {len(target)}"
        )
    if track.labels.max() >= z.shape[1]:
        raise ShapeError(
            f"label {int(track.labels.max())} is out of range for {z.shape[1]} phases"
        )
    if heat_weight < 0.0:
        raise ConfigError(f"heat_weight must be >= 0, got {heat_weight}")

    l1 = float(np.mean(np.abs(heat - target.values)))
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    picked = shifted[np.arange(frames), track.labels]
    cross_entropy = float(np.mean(log_norm - picked))
    return heat_weight * l1 + cross_entropy


def clip_indices(current_frame: int, phase_start: int, sampler: SamplerConfig) -> np.ndarray:
    """Frame indices of the fixed-size clip ending at ``current_frame``.

    The clip always has ``alpha`` entries spaced ``w`` apart, where
    ``w = max(1, ceil((current_frame - phase_start) / alpha))`` — the
    stride grows as the current phase gets longer, so a clip spans the
    whole phase so far at constant size.  Early indices that would fall
    before frame 1 are clamped to 1.  Indices are non-decreasing and end
    exactly at ``current_frame``.
    """
    if current_frame < 1:
        raise ValueError(f"current_frame must be >= 1, got {current_frame}")
    if not 1 <= phase_start <= current_frame:
        raise ValueError(
            f"phase_start must be in [1, current_frame], got {phase_start} "
            f"with current_frame {current_frame}"
        )
    elapsed = current_frame - phase_start
    stride = max(1, -(-elapsed // sampler.alpha))
    offsets = np.arange(sampler.alpha - 1, -1, -1, dtype=np.int64)
    return np.maximum(1, current_frame - stride * offsets)
