"""Synthetic corpora: label tracks, frame embeddings, and a fitted head.

The generator produces videos whose phases are linearly separable in
embedding space: each phase owns a unit-norm direction and frames are
that direction scaled by ``separation`` plus isotropic noise.  Two label
profiles exist — ``linear`` visits each phase once in order (the typical
workflow), ``recurring`` revisits at least one earlier phase (loops
happen in practice and break order-based shortcuts).

``fit_logit_head`` turns the stack into a working classifier without
training: it replays a calibration video, collects the head's final
fused rows, and installs a nearest-centroid readout (weight rows are
class centroids, biases ``-||c||^2 / 2``), which is the Bayes rule for
equal isotropic classes.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .errors import ConfigError
from .model import replay_outputs
from .rng import derive_seed
from .seqtypes import FeatureSequence
from .weights import WeightStore

LABEL_PROFILES = ("linear", "recurring")


def _generator(seed: int, *parts: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(seed, *parts)))


def _segment_lengths(gen: np.random.Generator, total: int, pieces: int) -> np.ndarray:
    """Split ``total`` frames into ``pieces`` contiguous runs of >= 1 frame."""
    cuts = np.sort(gen.choice(total - 1, size=pieces - 1, replace=False)) + 1
    edges = np.concatenate(([0], cuts, [total]))
    return np.diff(edges)


def synth_labels(seed: int, frames: int, num_phases: int, profile: str) -> np.ndarray:
    """A per-frame phase track with every phase present at least once."""
    if profile not in LABEL_PROFILES:
        raise ConfigError(f"unknown label profile {profile!r}")
    if num_phases < 2:
        raise ConfigError(f"num_phases must be >= 2, got {num_phases}")
    min_frames = num_phases if profile == "linear" else num_phases + 2
    if frames < min_frames:
        raise ConfigError(f"need at least {min_frames} frames, got {frames}")

    gen = _generator(seed, 1)
    if profile == "linear":
        order = list(range(num_phases))
    else:
        # Visit all phases in order, then return to two earlier phases so
        # at least one phase has two disjoint runs.
        order = list(range(num_phases))
        revisit = gen.choice(num_phases - 1, size=2, replace=False)
        order.extend(int(r) for r in np.sort(revisit))
    lengths = _segment_lengths(gen, frames, len(order))
    return np.repeat(np.asarray(order, dtype=np.int64), lengths)


def phase_directions(seed: int, num_phases: int, feature_dim: int) -> np.ndarray:
    """Unit-norm embedding direction per phase (corpus-level, not per video)."""
    gen = _generator(seed, 3)
    directions = gen.normal(size=(num_phases, feature_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions


def synth_features(
    seed: int,
    labels: np.ndarray,
    feature_dim: int,
    separation: float = 4.0,
    noise: float = 1.0,
    direction_seed: int | None = None,
) -> np.ndarray:
    """Per-frame embeddings clustered by phase (rows are float64).

    ``direction_seed`` fixes the phase geometry; videos of one corpus
    must share it, otherwise a head fitted on one video cannot transfer
    to the others.  It defaults to ``seed`` (single-video use).
    """
    labels = np.asarray(labels, dtype=np.int64)
    num_phases = int(labels.max()) + 1
    directions = phase_directions(
        seed if direction_seed is None else direction_seed, num_phases, feature_dim
    )
    gen = _generator(seed, 2)
    frames = gen.normal(scale=noise, size=(labels.shape[0], feature_dim))
    return directions[labels] * separation + frames


def synth_video(
    seed: int,
    frames: int,
    cfg: ModelConfig,
    profile: str = "linear",
    separation: float = 4.0,
    noise: float = 1.0,
    direction_seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(features, labels) for one video, fully determined by the seeds."""
    labels = synth_labels(seed, frames, cfg.num_phases, profile)
    features = synth_features(
        seed, labels, cfg.feature_dim, separation, noise, direction_seed
    )
    return features, labels


def fit_logit_head(
    store: WeightStore,
    cfg: ModelConfig,
    features: np.ndarray,
    labels: np.ndarray,
    seed_root: int,
) -> WeightStore:
    """Install a nearest-centroid phase readout fitted on one video.

    Replays the calibration video through the stack, averages the head's
    final fused row per phase, and writes those centroids into the
    ``out.logits`` head.  Phases absent from the calibration video keep
    a zero weight row with a bias below every fitted one so they are
    never preferred.
    """
    labels = np.asarray(labels, dtype=np.int64)
    prefix = FeatureSequence(role="e", start_frame=1, data=np.asarray(features, dtype=np.float64))
    if labels.shape[0] != len(prefix):
        raise ConfigError(
            f"calibration has {labels.shape[0]} labels for {len(prefix)} frames"
        )
    _, head_rows = replay_outputs(prefix, store, cfg, seed_root, collect_head_rows=True)

    weight = np.zeros((cfg.num_phases, cfg.dim_long))
    bias = np.zeros(cfg.num_phases)
    fitted = []
    for phase in range(cfg.num_phases):
        mask = labels == phase
        if mask.any():
            centroid = head_rows[mask].mean(axis=0)
            weight[phase] = centroid
            bias[phase] = -0.5 * float(centroid @ centroid)
            fitted.append(phase)
    if not fitted:
        raise ConfigError("calibration video contains no labeled frames")
    floor = min(bias[p] for p in fitted) - 1.0
    for phase in range(cfg.num_phases):
        if phase not in fitted:
            bias[phase] = floor
    return store.replaced({"out.logits.w": weight, "out.logits.b": bias})
