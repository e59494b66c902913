"""Phase-recognition evaluation: accuracy, per-phase scores, relaxed mode.

Per-phase precision, recall, and Jaccard are percentages derived from
frame-level true/false positives.  A phase that appears in neither the
predictions nor the ground truth is skipped when averaging; a phase that
appears in only one of them scores zero (its denominator for the missing
side would be empty, and zero is the honest value, not a skip).

Relaxed mode acknowledges that annotating an exact transition frame is
ambiguous: inside a +/- ``window_s`` second band around each true
boundary, a prediction matching either the outgoing or the incoming
phase counts as correct.  It is implemented by rewriting such in-band
predictions to the ground-truth label before scoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .transition import PhaseTrack


@dataclass(frozen=True)
class PhaseScore:
    """Scores for one phase, in percent."""

    phase: int
    precision_pct: float
    recall_pct: float
    jaccard_pct: float


@dataclass(frozen=True)
class EvalReport:
    """Video-level evaluation summary (all values in percent)."""

    accuracy_pct: float
    per_phase: tuple[PhaseScore, ...]
    mean_precision_pct: float
    mean_recall_pct: float
    mean_jaccard_pct: float
    relaxed: bool = False


def _as_labels(values, name: str) -> np.ndarray:
    if isinstance(values, PhaseTrack):
        return values.labels
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size < 1:
        raise ShapeError(f"{name} must be a non-empty 1-D label array")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ShapeError(f"{name} must hold integers, got dtype {arr.dtype}")
    return arr.astype(np.int64)


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = _as_labels(pred, "predictions")
    g = _as_labels(truth, "ground truth")
    if p.shape != g.shape:
        raise ShapeError(
            f"predictions and ground truth differ in length: {p.shape[0]} vs {g.shape[0]}"
        )
    return p, g


def video_accuracy(pred, truth) -> float:
    """Percentage of frames whose predicted phase matches the ground truth."""
    p, g = _paired(pred, truth)
    return float(np.mean(p == g) * 100.0)


def phase_level_metrics(pred, truth, num_phases: int, relaxed: bool = False) -> EvalReport:
    """Frame-level accuracy plus per-phase precision/recall/Jaccard.

    ``num_phases`` fixes the phase universe 0..num_phases-1; labels must
    stay inside it.
    """
    p, g = _paired(pred, truth)
    if num_phases < 1:
        raise ShapeError(f"num_phases must be >= 1, got {num_phases}")
    if max(int(p.max()), int(g.max())) >= num_phases:
        raise ShapeError(
            f"labels exceed the declared phase count {num_phases}"
        )

    scores: list[PhaseScore] = []
    for phase in range(num_phases):
        in_pred = p == phase
        in_truth = g == phase
        if not in_pred.any() and not in_truth.any():
            continue
        tp = float(np.count_nonzero(in_pred & in_truth))
        fp = float(np.count_nonzero(in_pred & ~in_truth))
        fn = float(np.count_nonzero(~in_pred & in_truth))
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        jaccard = tp / (tp + fp + fn)
        scores.append(
            PhaseScore(
                phase=phase,
                precision_pct=precision * 100.0,
                recall_pct=recall * 100.0,
                jaccard_pct=jaccard * 100.0,
            )
        )

    return EvalReport(
        accuracy_pct=video_accuracy(p, g),
        per_phase=tuple(scores),
        mean_precision_pct=float(np.mean([s.precision_pct for s in scores])),
        mean_recall_pct=float(np.mean([s.recall_pct for s in scores])),
        mean_jaccard_pct=float(np.mean([s.jaccard_pct for s in scores])),
        relaxed=relaxed,
    )


def relax_predictions(pred, truth, fps: float = 1.0, window_s: float = 10.0) -> np.ndarray:
    """Forgive boundary-adjacent predictions by rewriting them to the truth.

    Around every ground-truth boundary ``b`` (first frame of the new
    phase), frames in ``[b - w, b + w - 1]`` with ``w = window_s * fps``
    whose prediction equals the outgoing phase ``truth[b-1]`` or the
    incoming phase ``truth[b]`` are replaced by the true label.  Returns
    the rewritten copy; inputs are untouched.
    """
    p, g = _paired(pred, truth)
    if fps <= 0 or window_s < 0:
        raise ShapeError("fps must be > 0 and window_s >= 0")
    w = int(round(window_s * fps))
    relaxed = p.copy()
    boundaries = np.flatnonzero(g[1:] != g[:-1]) + 1
    for b in boundaries:
        lo = max(0, b - w)
        hi = min(p.shape[0], b + w)
        band = slice(lo, hi)
        forgivable = (relaxed[band] == g[b - 1]) | (relaxed[band] == g[b])
        relaxed[band] = np.where(forgivable, g[band], relaxed[band])
    return relaxed


def relaxed_boundary_eval(
    pred, truth, num_phases: int, fps: float = 1.0, window_s: float = 10.0
) -> EvalReport:
    """Phase metrics after boundary forgiveness (see :func:`relax_predictions`)."""
    p, g = _paired(pred, truth)
    return phase_level_metrics(
        relax_predictions(p, g, fps=fps, window_s=window_s), g, num_phases, relaxed=True
    )
