"""Wiring of the full temporal stack, one frame at a time.

The stack condenses a stream of frame embeddings through three feature
widths:

* short stage — fuses the last ``window_short`` embeddings (auxiliary:
  the stage's own output from ``window_short`` frames ago) into
  short-range features;
* long stage — fuses the last ``window_long`` short-range rows
  (auxiliary: its own output from ``window_long`` frames ago) into
  long-range features;
* global stage — causally compresses the *entire* long-range history
  into a narrow global feature for the current window, using sparse
  encoder attention so cost stays near-linear in stream length;
* recognition head — fuses short and global features onto the
  long-range window and emits per-frame phase logits plus a
  transition-proximity score.

Both local stages run a cascade of two fusion modules with independent
weights: the first module's output becomes the auxiliary branch of the
second, whose main branch is the raw window again.

:class:`TemporalStack` is the single stepping engine.  Live streaming
wraps it directly and offline batch evaluation replays it from frame 1,
which is what makes online and offline results bit-identical.
"""

from __future__ import annotations

from collections import deque
from dataclasses import replace

import numpy as np

from .config import ModelConfig
from .errors import ShapeError, StreamError
from .fusion import fusion_forward
from .linalg import linear_apply, sigmoid
from .rng import derive_seed
from .seqtypes import FeatureSequence, PhaseOutput
from .weights import WeightStore

# Stable identifiers mixed into seed derivation, one per pipeline stage
# that consumes randomness.  Only the global stage samples keys today;
# the map is kept total so future sparse stages cannot collide.
STAGE_IDS = {"short": 1, "long": 2, "global": 3, "head_local": 4, "head_global": 5}


def _check_role(seq: FeatureSequence, role: str, cfg: ModelConfig, what: str) -> None:
    if seq.role != role:
        raise ShapeError(f"{what} must have role {role!r}, got {seq.role!r}")
    want = cfg.role_dim(role)
    if seq.dim != want:
        raise ShapeError(f"{what} must have width {want}, got {seq.dim}")


def local_stage_forward(
    window: FeatureSequence,
    prev_output: FeatureSequence | None,
    store: WeightStore,
    cfg: ModelConfig,
) -> FeatureSequence:
    """Run one local stage (short or long, picked by the window's role).

    ``prev_output`` is this stage's own full output from one window-span
    ago; pass None at the start of a stream and a single all-zero row
    (frame index 0) is used so the fusion module always has an auxiliary
    branch.
    """
    if window.role == "e":
        out_role, prefix, fcfg, span = "s", "short", cfg.short_fusion(), cfg.window_short
    elif window.role == "s":
        out_role, prefix, fcfg, span = "l", "long", cfg.long_fusion(), cfg.window_long
    else:
        raise ShapeError(f"local stage expects an 'e' or 's' window, got {window.role!r}")
    _check_role(window, window.role, cfg, "local stage window")
    if len(window) > span:
        raise ShapeError(
            f"local stage window has {len(window)} rows, limit is {span}"
        )

    if prev_output is None:
        prev_output = FeatureSequence(
            role=out_role, start_frame=0, data=np.zeros((1, fcfg.model_dim))
        )
    _check_role(prev_output, out_role, cfg, "previous stage output")

    first = fusion_forward(
        prev_output.data,
        window.data,
        store.block(f"{prefix}.0"),
        fcfg,
        aux_start=prev_output.start_frame,
        main_start=window.start_frame,
    )
    second = fusion_forward(
        first,
        window.data,
        store.block(f"{prefix}.1"),
        fcfg,
        aux_start=window.start_frame,
        main_start=window.start_frame,
    )
    return FeatureSequence(role=out_role, start_frame=window.start_frame, data=second)


def global_stage_forward(
    history: FeatureSequence,
    window: FeatureSequence,
    store: WeightStore,
    cfg: ModelConfig,
    seed_root: int,
) -> FeatureSequence:
    """Compress the full long-range history into global features.

    ``history`` must cover frames 1..t and ``window`` must be its suffix
    of the last ``min(t, window_short)`` frames.  The encoder's sparse
    sampling is seeded per (stream seed, frame t, stage), so the draw for
    a given frame never depends on how the engine reached that frame.
    """
    _check_role(history, "l", cfg, "global stage history")
    _check_role(window, "l", cfg, "global stage window")
    if history.start_frame != 1:
        raise ShapeError(
            f"global stage history must start at frame 1, got {history.start_frame}"
        )
    t = history.end_frame
    want = min(len(history), cfg.window_short)
    if window.end_frame != t or len(window) != want:
        raise ShapeError(
            f"global stage window must be the last {want} rows of the history "
            f"(frames {t - want + 1}..{t}); got frames "
            f"{window.start_frame}..{window.end_frame}"
        )

    fcfg = cfg.global_fusion()
    frame_seed = derive_seed(seed_root, t, STAGE_IDS["global"])
    fcfg = replace(fcfg, sparse=replace(fcfg.sparse, seed=frame_seed))
    out = fusion_forward(
        history.data,
        window.data,
        store.block("global.0"),
        fcfg,
        aux_start=history.start_frame,
        main_start=window.start_frame,
    )
    return FeatureSequence(role="g", start_frame=window.start_frame, data=out)


def recognition_head(
    short_win: FeatureSequence,
    long_win: FeatureSequence,
    global_win: FeatureSequence,
    store: WeightStore,
    cfg: ModelConfig,
    return_head_rows: bool = False,
):
    """Fuse the three feature scales and emit per-frame phase outputs.

    All three windows must cover the same frames.  Fusion happens at the
    long-range width: first the short features are merged onto the
    long-range rows, then the global features onto that result; linear
    heads read the final rows.  ``return_head_rows`` additionally returns
    the final fused matrix (used when fitting a classifier head).
    """
    _check_role(short_win, "s", cfg, "head short window")
    _check_role(long_win, "l", cfg, "head long window")
    _check_role(global_win, "g", cfg, "head global window")
    for name, win in (("short", short_win), ("global", global_win)):
        if win.start_frame != long_win.start_frame or len(win) != len(long_win):
            raise ShapeError(
                f"head {name} window covers frames {win.start_frame}..{win.end_frame}, "
                f"expected {long_win.start_frame}..{long_win.end_frame}"
            )
    if len(long_win) > cfg.window_short:
        raise ShapeError(
            f"head window has {len(long_win)} rows, limit is {cfg.window_short}"
        )

    fcfg = cfg.head_fusion()
    fused = fusion_forward(
        short_win.data,
        long_win.data,
        store.block("head.local.0"),
        fcfg,
        aux_start=short_win.start_frame,
        main_start=long_win.start_frame,
    )
    final = fusion_forward(
        global_win.data,
        fused,
        store.block("head.global.0"),
        fcfg,
        aux_start=global_win.start_frame,
        main_start=long_win.start_frame,
    )
    logits = linear_apply(store.linear("out.logits"), final)
    heat = sigmoid(linear_apply(store.linear("out.heat"), final)[:, 0])
    outputs = [
        PhaseOutput.from_logits(frame, logits[i], heat[i])
        for i, frame in enumerate(long_win.frames())
    ]
    if return_head_rows:
        return outputs, final
    return outputs


class _RowRing:
    """Fixed-capacity ring of feature rows with contiguous tail reads."""

    def __init__(self, capacity: int, dim: int) -> None:
        self._buffer = np.zeros((capacity, dim), dtype=np.float64)
        self._next = 0
        self._count = 0

    @property
    def count(self) -> int:
        return self._count

    def push(self, row: np.ndarray) -> None:
        self._buffer[self._next] = row
        self._next = (self._next + 1) % self._buffer.shape[0]
        self._count = min(self._count + 1, self._buffer.shape[0])

    def last(self, n: int) -> np.ndarray:
        if not 1 <= n <= self._count:
            raise StreamError(f"ring holds {self._count} rows, cannot read last {n}")
        idx = (self._next - n + np.arange(n)) % self._buffer.shape[0]
        return self._buffer[idx]

    def state_rows(self) -> np.ndarray:
        """All live rows, oldest first (for checkpoints and equality)."""
        if self._count == 0:
            return self._buffer[:0].copy()
        return self.last(self._count)

    def load_rows(self, rows: np.ndarray) -> None:
        self._next = 0
        self._count = 0
        for row in rows:
            self.push(row)


class _GrowingRows:
    """Append-only row matrix with amortized growth (full-history storage)."""

    def __init__(self, dim: int) -> None:
        self._buffer = np.zeros((16, dim), dtype=np.float64)
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def push(self, row: np.ndarray) -> None:
        if self._count == self._buffer.shape[0]:
            grown = np.zeros((self._buffer.shape[0] * 2, self._buffer.shape[1]))
            grown[: self._count] = self._buffer
            self._buffer = grown
        self._buffer[self._count] = row
        self._count += 1

    def view(self) -> np.ndarray:
        return self._buffer[: self._count]

    def load_rows(self, rows: np.ndarray) -> None:
        self._count = 0
        for row in rows:
            self.push(row)


class TemporalStack:
    """Mutable per-stream state plus the canonical per-frame step.

    Keeps exactly the state the pipeline definition requires: the last
    ``window_long`` frame embeddings and short-range rows, the full
    long-range history, the cached stage outputs needed as "previous
    clip" auxiliaries, and the frame counter.  ``advance`` consumes one
    embedding row and returns the current frame's output.
    """

    def __init__(self, store: WeightStore, cfg: ModelConfig, seed_root: int) -> None:
        self.store = store
        self.cfg = cfg
        self.seed_root = int(seed_root)
        self.frame_count = 0
        self.embed_window = _RowRing(cfg.window_long, cfg.feature_dim)
        self.short_window = _RowRing(cfg.window_long, cfg.dim_short)
        self.long_history = _GrowingRows(cfg.dim_long)
        # Cached full stage outputs, keyed by absolute frame, serving as the
        # "previous clip" auxiliary exactly one window-span later.
        self.prev_short: deque[tuple[int, FeatureSequence]] = deque(maxlen=cfg.window_short)
        self.prev_long: deque[tuple[int, FeatureSequence]] = deque(maxlen=cfg.window_long)
        self.collect_head_rows = False
        self.head_rows: list[np.ndarray] = []

    def _cached_output(
        self, cache: deque[tuple[int, FeatureSequence]], frame: int
    ) -> FeatureSequence | None:
        if frame < 1:
            return None
        if not cache or cache[0][0] != frame:
            raise StreamError(
                f"stage cache is missing the output for frame {frame}; "
                "state was advanced out of order"
            )
        return cache[0][1]

    def advance(self, embedding_row: np.ndarray) -> PhaseOutput:
        row = np.asarray(embedding_row, dtype=np.float64)
        if row.ndim != 1 or row.shape[0] != self.cfg.feature_dim:
            raise ShapeError(
                f"frame embedding must be a 1-D row of width {self.cfg.feature_dim}, "
                f"got shape {row.shape}"
            )
        if not np.all(np.isfinite(row)):
            raise ValueError("frame embedding contains non-finite values")
        cfg = self.cfg
        t = self.frame_count + 1
        self.embed_window.push(row)

        short_len = min(t, cfg.window_short)
        embed_win = FeatureSequence(
            role="e", start_frame=t - short_len + 1, data=self.embed_window.last(short_len)
        )
        short_out = local_stage_forward(
            embed_win, self._cached_output(self.prev_short, t - cfg.window_short),
            self.store, cfg,
        )
        self.short_window.push(short_out.data[-1])
        self.prev_short.append((t, short_out))

        long_len = min(t, cfg.window_long)
        short_win_full = FeatureSequence(
            role="s", start_frame=t - long_len + 1, data=self.short_window.last(long_len)
        )
        long_out = local_stage_forward(
            short_win_full, self._cached_output(self.prev_long, t - cfg.window_long),
            self.store, cfg,
        )
        self.long_history.push(long_out.data[-1])
        self.prev_long.append((t, long_out))

        history = FeatureSequence(role="l", start_frame=1, data=self.long_history.view())
        head_len = min(t, cfg.window_short)
        long_win = history.tail(head_len)
        global_out = global_stage_forward(history, long_win, self.store, cfg, self.seed_root)
        short_win = FeatureSequence(
            role="s", start_frame=t - head_len + 1, data=self.short_window.last(head_len)
        )

        outputs, final = recognition_head(
            short_win, long_win, global_out, self.store, cfg, return_head_rows=True
        )
        if self.collect_head_rows:
            self.head_rows.append(final[-1].copy())
        self.frame_count = t
        return outputs[-1]


def replay_outputs(
    prefix: FeatureSequence,
    store: WeightStore,
    cfg: ModelConfig,
    seed_root: int,
    collect_head_rows: bool = False,
):
    """Feed an embedding prefix through a fresh stack, one frame at a time.

    Returns the per-frame outputs (and the per-frame head rows when
    requested).  This *is* the batch-mode computation: identical to a
    live stream by construction because it runs the same stepping code.
    """
    _check_role(prefix, "e", cfg, "embedding prefix")
    if prefix.start_frame != 1:
        raise ShapeError(
            f"embedding prefix must start at frame 1, got {prefix.start_frame}"
        )
    stack = TemporalStack(store, cfg, seed_root)
    stack.collect_head_rows = collect_head_rows
    outputs = [stack.advance(row) for row in prefix.data]
    if collect_head_rows:
        return outputs, np.array(stack.head_rows)
    return outputs


def batch_forward(
    prefix: FeatureSequence,
    store: WeightStore,
    cfg: ModelConfig,
    seed_root: int,
) -> PhaseOutput:
    """Offline forward pass over frames 1..t; returns frame t's output."""
    if len(prefix) < 1:
        raise ShapeError("embedding prefix must be non-empty")
    return replay_outputs(prefix, store, cfg, seed_root)[-1]
