"""Online inference sessions: frame push, checkpoint, exact resume.

A :class:`StreamState` owns a :class:`~surgphase.model.TemporalStack`
plus the log of emitted outputs.  Because every stage's sampling seed is
derived from (stream seed, frame index) and all mutable state lives in
the stack, a stream can be checkpointed to bytes at any frame and
restored elsewhere to continue *bit-identically* — and a fresh batch
replay over the same embedding prefix reproduces the same outputs.

The checkpoint is self-contained: it embeds the config text, the full
float64 weights, and every state array, so ``restore`` needs nothing
but the bytes.  Layout (all little-endian): magic ``LVCK``, u16
version, then a fixed sequence of length-prefixed named sections.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .config import ModelConfig, config_from_text, config_to_text
from .errors import FormatError, StreamError
from .io_formats import _Reader
from .model import TemporalStack
from .seqtypes import FeatureSequence, PhaseOutput
from .weights import WeightStore, validate_store

CHECKPOINT_MAGIC = b"LVCK"
CHECKPOINT_VERSION = 1
_SECTION_ORDER = (
    "config",
    "seed",
    "frame_count",
    "weights",
    "embed_window",
    "short_window",
    "long_history",
    "prev_short",
    "prev_long",
    "outputs",
)
_SEED_MASK = 0xFFFFFFFFFFFFFFFF


class StreamState:
    """One live inference session over a growing video stream."""

    def __init__(self, store: WeightStore, cfg: ModelConfig, seed_root: int) -> None:
        validate_store(store, cfg)
        self.cfg = cfg
        self.seed_root = int(seed_root) & _SEED_MASK
        self.stack = TemporalStack(store, cfg, self.seed_root)
        self.outputs: list[PhaseOutput] = []

    @property
    def store(self) -> WeightStore:
        return self.stack.store

    @property
    def frame_count(self) -> int:
        return self.stack.frame_count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StreamState):
            return NotImplemented
        if (
            self.cfg != other.cfg
            or self.seed_root != other.seed_root
            or self.frame_count != other.frame_count
            or not self.store.equals(other.store)
        ):
            return False
        mine, theirs = _state_arrays(self), _state_arrays(other)
        if len(mine) != len(theirs):
            return False
        if any(
            a.shape != b.shape or not np.array_equal(a, b) for a, b in zip(mine, theirs)
        ):
            return False
        if len(self.outputs) != len(other.outputs):
            return False
        return all(a.bit_equal(b) for a, b in zip(self.outputs, other.outputs))

    __hash__ = None  # mutable


def _state_arrays(state: StreamState) -> list[np.ndarray]:
    stack = state.stack
    arrays = [
        stack.embed_window.state_rows(),
        stack.short_window.state_rows(),
        stack.long_history.view(),
    ]
    for cache in (stack.prev_short, stack.prev_long):
        arrays.append(np.asarray([[time, seq.start_frame] for time, seq in cache], dtype=np.float64).reshape(-1, 2))
        arrays.extend(seq.data for _, seq in cache)
    return arrays


def init_stream(store: WeightStore, cfg: ModelConfig, seed_root: int) -> StreamState:
    """Validate the weights against the config and open a session at frame 0."""
    return StreamState(store, cfg, seed_root)


def push_frame(state: StreamState, embedding_row) -> PhaseOutput:
    """Consume the next frame's embedding; returns that frame's output."""
    out = state.stack.advance(embedding_row)
    state.outputs.append(out)
    return out


def _matrix_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise StreamError(f"internal: expected a matrix, got {arr.ndim}-D")
    return struct.pack("<II", arr.shape[0], arr.shape[1]) + arr.tobytes(order="C")


def _read_matrix(reader: _Reader) -> np.ndarray:
    rows, cols = reader.unpack("II")
    payload = reader.take(8 * rows * cols)
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def _cache_bytes(cache) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<I", len(cache)))
    for time, seq in cache:
        out.write(struct.pack("<QQ", time, seq.start_frame))
        out.write(_matrix_bytes(seq.data))
    return out.getvalue()


def _read_cache(reader: _Reader, role: str):
    (count,) = reader.unpack("I")
    entries = []
    for _ in range(count):
        time, start = reader.unpack("QQ")
        data = _read_matrix(reader)
        entries.append((int(time), FeatureSequence(role=role, start_frame=int(start), data=data)))
    return entries


def _weights_bytes(store: WeightStore) -> bytes:
    out = io.BytesIO()
    names = store.names()
    out.write(struct.pack("<I", len(names)))
    for name in names:
        encoded = name.encode("utf-8")
        tensor = np.ascontiguousarray(store[name], dtype=np.float64)
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<B", tensor.ndim))
        for size in tensor.shape:
            out.write(struct.pack("<I", size))
        out.write(tensor.tobytes(order="C"))
    return out.getvalue()


def _read_weights(reader: _Reader) -> WeightStore:
    (count,) = reader.unpack("I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("H")
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack("B")
        shape = tuple(reader.unpack("I" * rank)) if rank else ()
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = reader.take(8 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    return WeightStore(tensors)


def _outputs_bytes(outputs: list[PhaseOutput]) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<I", len(outputs)))
    for item in outputs:
        out.write(struct.pack("<QI", item.frame, item.logits.shape[0]))
        out.write(np.ascontiguousarray(item.logits, dtype=np.float64).tobytes())
        out.write(struct.pack("<d", item.heat))
    return out.getvalue()


def _read_outputs(reader: _Reader) -> list[PhaseOutput]:
    (count,) = reader.unpack("I")
    outputs = []
    for _ in range(count):
        frame, width = reader.unpack("QI")
        logits = np.frombuffer(reader.take(8 * width), dtype="<f8").copy()
        (heat,) = reader.unpack("d")
        outputs.append(PhaseOutput.from_logits(int(frame), logits, heat))
    return outputs


def checkpoint(state: StreamState) -> bytes:
    """Serialize the complete session to bytes."""
    stack = state.stack
    sections: dict[str, bytes] = {
        "config": config_to_text(state.cfg).encode("utf-8"),
        "seed": struct.pack("<Q", state.seed_root),
        "frame_count": struct.pack("<Q", state.frame_count),
        "weights": _weights_bytes(state.store),
        "embed_window": _matrix_bytes(stack.embed_window.state_rows()),
        "short_window": _matrix_bytes(stack.short_window.state_rows()),
        "long_history": _matrix_bytes(stack.long_history.view()),
        "prev_short": _cache_bytes(stack.prev_short),
        "prev_long": _cache_bytes(stack.prev_long),
        "outputs": _outputs_bytes(state.outputs),
    }
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack("<H", CHECKPOINT_VERSION))
    for name in _SECTION_ORDER:
        encoded = name.encode("utf-8")
        payload = sections[name]
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<Q", len(payload)))
        out.write(payload)
    return out.getvalue()


def restore(data: bytes) -> StreamState:
    """Rebuild a session from :func:`checkpoint` bytes, ready to continue."""
    reader = _Reader(data, "checkpoint")
    magic = reader.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(
            "bad_magic", f"checkpoint magic is {magic!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    (version,) = reader.unpack("H")
    if version != CHECKPOINT_VERSION:
        raise FormatError(
            "bad_version", f"checkpoint version is {version}, expected {CHECKPOINT_VERSION}"
        )
    sections: dict[str, _Reader] = {}
    for expected in _SECTION_ORDER:
        (name_len,) = reader.unpack("H")
        name = reader.take(name_len).decode("utf-8")
        if name != expected:
            raise FormatError(
                "bad_directory", f"checkpoint section {name!r} where {expected!r} expected"
            )
        (length,) = reader.unpack("Q")
        sections[name] = _Reader(reader.take(length), f"checkpoint section {name!r}")
    reader.finish()

    cfg = config_from_text(sections["config"].data.decode("utf-8"))
    (seed_root,) = sections["seed"].unpack("Q")
    (frame_count,) = sections["frame_count"].unpack("Q")
    store = _read_weights(sections["weights"])

    state = StreamState(store, cfg, int(seed_root))
    stack = state.stack
    stack.frame_count = int(frame_count)
    stack.embed_window.load_rows(_read_matrix(sections["embed_window"]))
    stack.short_window.load_rows(_read_matrix(sections["short_window"]))
    stack.long_history.load_rows(_read_matrix(sections["long_history"]))
    stack.prev_short.extend(_read_cache(sections["prev_short"], "s"))
    stack.prev_long.extend(_read_cache(sections["prev_long"], "l"))
    state.outputs = _read_outputs(sections["outputs"])

    for name in _SECTION_ORDER:
        if name != "config":
            sections[name].finish()
    if len(state.outputs) != stack.frame_count:
        raise FormatError(
            "bad_value",
            f"checkpoint has {len(state.outputs)} outputs for {stack.frame_count} frames",
        )
    return state
