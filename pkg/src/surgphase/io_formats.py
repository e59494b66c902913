"""Serialized interchange formats.

Binary formats are little-endian and versioned:

* feature file — magic ``LVFE``, u16 version, u32 frame count, u32
  feature width, then ``frames * width`` float32 values row-major;
* weight file — magic ``LVWT``, u16 version, u32 tensor count, a
  directory sorted by tensor name (u16 name length + UTF-8 name, u8
  rank, u32 per dimension, u64 byte offset into the payload), then the
  concatenated float32 payloads.

Labels travel as ``frame,phase`` CSV with 1-based contiguous frames;
predictions as ``frame,phase,heat,confidence`` CSV with nine-decimal
floats.  Internal math stays float64 — narrowing to float32 happens
only in these writers.

All malformed-input failures raise :class:`~surgphase.errors.FormatError`
with a machine-readable ``code``.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .weights import WeightStore

FEATURE_MAGIC = b"LVFE"
WEIGHT_MAGIC = b"LVWT"
FEATURE_VERSION = 1
WEIGHT_VERSION = 1


class _Reader:
    """Cursor over an in-memory buffer with typed, bounds-checked reads."""

    def __init__(self, data: bytes, what: str) -> None:
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise FormatError(
                "truncated", f"{self.what} ends early: needed {count} more bytes"
            )
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                "trailing_data",
                f"{self.what} has {len(self.data) - self.pos} unexpected trailing bytes",
            )


def _check_header(reader: _Reader, magic: bytes, version: int) -> None:
    got = reader.take(4)
    if got != magic:
        raise FormatError("bad_magic", f"{reader.what} magic is {got!r}, expected {magic!r}")
    (got_version,) = reader.unpack("H")
    if got_version != version:
        raise FormatError(
            "bad_version", f"{reader.what} version is {got_version}, expected {version}"
        )


def feature_bytes(features: np.ndarray) -> bytes:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise FormatError("bad_value", f"features must be non-empty 2-D, got shape {arr.shape}")
    out = io.BytesIO()
    out.write(FEATURE_MAGIC)
    out.write(struct.pack("<HII", FEATURE_VERSION, arr.shape[0], arr.shape[1]))
    out.write(arr.astype("<f4").tobytes(order="C"))
    return out.getvalue()


def parse_feature_bytes(data: bytes) -> np.ndarray:
    reader = _Reader(data, "feature file")
    _check_header(reader, FEATURE_MAGIC, FEATURE_VERSION)
    frames, dim = reader.unpack("II")
    if frames < 1 or dim < 1:
        raise FormatError("bad_value", f"feature file declares empty shape ({frames}, {dim})")
    payload = reader.take(4 * frames * dim)
    reader.finish()
    flat = np.frombuffer(payload, dtype="<f4")
    return flat.astype(np.float64).reshape(frames, dim)


def write_features(path, features: np.ndarray) -> None:
    Path(path).write_bytes(feature_bytes(features))


def read_features(path) -> np.ndarray:
    return parse_feature_bytes(Path(path).read_bytes())


def weight_bytes(store: WeightStore) -> bytes:
    names = store.names()
    if not names:
        raise FormatError("bad_value", "weight store is empty")
    directory = io.BytesIO()
    payload = io.BytesIO()
    for name in names:
        tensor = store[name]
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError("bad_value", f"tensor name too long: {name!r}")
        directory.write(struct.pack("<H", len(encoded)))
        directory.write(encoded)
        directory.write(struct.pack("<B", tensor.ndim))
        for size in tensor.shape:
            directory.write(struct.pack("<I", size))
        directory.write(struct.pack("<Q", payload.tell()))
        payload.write(np.asarray(tensor, dtype="<f4").tobytes(order="C"))
    out = io.BytesIO()
    out.write(WEIGHT_MAGIC)
    out.write(struct.pack("<HI", WEIGHT_VERSION, len(names)))
    out.write(directory.getvalue())
    out.write(payload.getvalue())
    return out.getvalue()


def parse_weight_bytes(data: bytes) -> WeightStore:
    reader = _Reader(data, "weight file")
    _check_header(reader, WEIGHT_MAGIC, WEIGHT_VERSION)
    (count,) = reader.unpack("I")
    if count < 1:
        raise FormatError("bad_directory", "weight file declares zero tensors")
    entries: list[tuple[str, tuple[int, ...], int]] = []
    previous_name = None
    for _ in range(count):
        (name_len,) = reader.unpack("H")
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("bad_directory", "tensor name is not valid UTF-8") from exc
        (rank,) = reader.unpack("B")
        shape = tuple(reader.unpack("I" * rank)) if rank else ()
        (offset,) = reader.unpack("Q")
        if previous_name is not None and name <= previous_name:
            raise FormatError(
                "bad_directory", f"directory not sorted: {name!r} after {previous_name!r}"
            )
        previous_name = name
        entries.append((name, shape, offset))

    expected_offset = 0
    sizes: list[int] = []
    for name, shape, offset in entries:
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if size < 1:
            raise FormatError("bad_directory", f"tensor {name!r} has an empty shape {shape}")
        if offset != expected_offset:
            raise FormatError(
                "bad_directory",
                f"tensor {name!r} at offset {offset}, expected {expected_offset}",
            )
        sizes.append(size)
        expected_offset += 4 * size

    payload = reader.take(expected_offset)
    reader.finish()
    tensors: dict[str, np.ndarray] = {}
    cursor = 0
    for (name, shape, _), size in zip(entries, sizes):
        flat = np.frombuffer(payload, dtype="<f4", count=size, offset=cursor)
        tensors[name] = flat.astype(np.float64).reshape(shape)
        cursor += 4 * size
    return WeightStore(tensors)


def write_weights(path, store: WeightStore) -> None:
    Path(path).write_bytes(weight_bytes(store))


def read_weights(path) -> WeightStore:
    return parse_weight_bytes(Path(path).read_bytes())


def write_labels(path, labels) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size < 1:
        raise FormatError("bad_value", "labels must be a non-empty 1-D array")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "phase"])
        for i, phase in enumerate(arr, start=1):
            writer.writerow([i, int(phase)])


def read_labels(path) -> np.ndarray:
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != ["frame", "phase"]:
        raise FormatError("bad_value", "label file must start with a 'frame,phase' header")
    labels: list[int] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError("bad_value", f"label line {line_no} does not have 2 fields")
        try:
            frame, phase = int(row[0]), int(row[1])
        except ValueError as exc:
            raise FormatError("bad_value", f"label line {line_no} is not integers") from exc
        if frame != line_no - 1:
            raise FormatError(
                "bad_value", f"label line {line_no}: frame {frame} breaks 1-based contiguity"
            )
        if phase < 0:
            raise FormatError("bad_value", f"label line {line_no}: negative phase {phase}")
        labels.append(phase)
    if not labels:
        raise FormatError("bad_value", "label file has no rows")
    return np.asarray(labels, dtype=np.int64)


PREDICTION_HEADER = ["frame", "phase", "heat", "confidence"]


def write_predictions(path, outputs) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(PREDICTION_HEADER)
        for out in outputs:
            writer.writerow(
                [out.frame, out.predicted_phase, f"{out.heat:.9f}", f"{out.confidence:.9f}"]
            )


def read_predictions(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (frames, phases, heat, confidence) arrays from a prediction CSV."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != PREDICTION_HEADER:
        raise FormatError(
            "bad_value", "prediction file must start with 'frame,phase,heat,confidence'"
        )
    frames, phases, heat, conf = [], [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise FormatError("bad_value", f"prediction line {line_no} does not have 4 fields")
        try:
            frames.append(int(row[0]))
            phases.append(int(row[1]))
            heat.append(float(row[2]))
            conf.append(float(row[3]))
        except ValueError as exc:
            raise FormatError("bad_value", f"prediction line {line_no} is malformed") from exc
    if not frames:
        raise FormatError("bad_value", "prediction file has no rows")
    return (
        np.asarray(frames, dtype=np.int64),
        np.asarray(phases, dtype=np.int64),
        np.asarray(heat, dtype=np.float64),
        np.asarray(conf, dtype=np.float64),
    )
