"""Binary feature/weight files and CSV label/prediction files."""

from __future__ import annotations

import re
import struct

import numpy as np
import pytest

from surgphase.errors import FormatError
from surgphase.io_formats import (
    FEATURE_MAGIC,
    FEATURE_VERSION,
    WEIGHT_MAGIC,
    WEIGHT_VERSION,
    feature_bytes,
    parse_feature_bytes,
    parse_weight_bytes,
    read_features,
    read_labels,
    read_predictions,
    read_weights,
    weight_bytes,
    write_features,
    write_labels,
    write_predictions,
    write_weights,
)
from surgphase.seqtypes import PhaseOutput


class TestFeatureFiles:
    def test_roundtrip_narrows_to_float32(self, tmp_path) -> None:
        arr = np.random.default_rng(0).normal(size=(7, 5))
        path = tmp_path / "clip.feat"
        write_features(path, arr)
        got = read_features(path)
        assert got.shape == (7, 5)
        assert got.dtype == np.float64
        np.testing.assert_array_equal(got, arr.astype(np.float32).astype(np.float64))

    def test_bytes_are_deterministic(self) -> None:
        arr = np.random.default_rng(1).normal(size=(3, 4))
        assert feature_bytes(arr) == feature_bytes(arr)

    def test_header_fields(self) -> None:
        blob = feature_bytes(np.ones((2, 3)))
        assert blob[:4] == FEATURE_MAGIC
        version, frames, dim = struct.unpack("<HII", blob[4:14])
        assert (version, frames, dim) == (FEATURE_VERSION, 2, 3)
        assert len(blob) == 14 + 4 * 2 * 3

    def test_malformed_blobs(self) -> None:
        blob = feature_bytes(np.ones((2, 3)))
        cases = {
            "bad_magic": b"NOPE" + blob[4:],
            "bad_version": blob[:4] + struct.pack("<H", 9) + blob[6:],
            "truncated": blob[:-3],
            "trailing_data": blob + b"\x00",
        }
        for code, data in cases.items():
            with pytest.raises(FormatError) as exc:
                parse_feature_bytes(data)
            assert exc.value.code == code

    def test_declared_empty_shape_rejected(self) -> None:
        blob = FEATURE_MAGIC + struct.pack("<HII", FEATURE_VERSION, 0, 3)
        with pytest.raises(FormatError) as exc:
            parse_feature_bytes(blob)
        assert exc.value.code == "bad_value"
        with pytest.raises(FormatError) as exc:
            feature_bytes(np.zeros((0, 3)))
        assert exc.value.code == "bad_value"


class TestWeightFiles:
    def test_roundtrip_preserves_every_tensor(self, tmp_path, toy_store) -> None:
        path = tmp_path / "model.wts"
        write_weights(path, toy_store)
        got = read_weights(path)
        assert got.names() == toy_store.names()
        for name in toy_store.names():
            want = toy_store[name].astype(np.float32).astype(np.float64)
            np.testing.assert_array_equal(got[name], want)
            assert got[name].shape == toy_store[name].shape

    def test_bytes_are_deterministic(self, toy_store) -> None:
        assert weight_bytes(toy_store) == weight_bytes(toy_store)

    @staticmethod
    def _craft(entries) -> bytes:
        directory, payload = b"", b""
        for name, shape, offset, values in entries:
            encoded = name.encode("utf-8")
            directory += struct.pack("<H", len(encoded)) + encoded
            directory += struct.pack("<B", len(shape))
            for size in shape:
                directory += struct.pack("<I", size)
            directory += struct.pack("<Q", offset)
            payload += np.asarray(values, dtype="<f4").tobytes()
        head = WEIGHT_MAGIC + struct.pack("<HI", WEIGHT_VERSION, len(entries))
        return head + directory + payload

    def test_unsorted_directory_rejected(self) -> None:
        blob = self._craft(
            [("b.w", (1,), 0, [1.0]), ("a.w", (1,), 4, [2.0])]
        )
        with pytest.raises(FormatError) as exc:
            parse_weight_bytes(blob)
        assert exc.value.code == "bad_directory"
        assert "sorted" in str(exc.value)

    def test_wrong_offset_rejected(self) -> None:
        blob = self._craft([("a.w", (1,), 4, [1.0])])
        with pytest.raises(FormatError) as exc:
            parse_weight_bytes(blob)
        assert exc.value.code == "bad_directory"

    def test_zero_sized_tensor_rejected(self) -> None:
        blob = self._craft([("a.w", (0,), 0, [])])
        with pytest.raises(FormatError) as exc:
            parse_weight_bytes(blob)
        assert exc.value.code == "bad_directory"

    def test_zero_tensor_count_rejected(self) -> None:
        blob = WEIGHT_MAGIC + struct.pack("<HI", WEIGHT_VERSION, 0)
        with pytest.raises(FormatError) as exc:
            parse_weight_bytes(blob)
        assert exc.value.code == "bad_directory"

    def test_malformed_blobs(self, toy_store) -> None:
        blob = weight_bytes(toy_store)
        cases = {
            "bad_magic": b"NOPE" + blob[4:],
            "bad_version": blob[:4] + struct.pack("<H", 99) + blob[6:],
            "truncated": blob[:-1],
            "trailing_data": blob + b"\x00",
        }
        for code, data in cases.items():
            with pytest.raises(FormatError) as exc:
                parse_weight_bytes(data)
            assert exc.value.code == code


class TestLabelFiles:
    def test_roundtrip(self, tmp_path) -> None:
        path = tmp_path / "labels.csv"
        labels = np.array([0, 0, 2, 1, 1], dtype=np.int64)
        write_labels(path, labels)
        assert np.array_equal(read_labels(path), labels)
        text = path.read_text().splitlines()
        assert text[0] == "frame,phase"
        assert text[1] == "1,0"
        assert text[-1] == "5,1"

    def test_frames_must_be_contiguous_from_one(self, tmp_path) -> None:
        path = tmp_path / "labels.csv"
        path.write_text("frame,phase\n1,0\n3,1\n")
        with pytest.raises(FormatError) as exc:
            read_labels(path)
        assert exc.value.code == "bad_value"
        assert "contiguity" in str(exc.value)
        path.write_text("frame,phase\n2,0\n")
        with pytest.raises(FormatError):
            read_labels(path)

    def test_malformed_label_files(self, tmp_path) -> None:
        path = tmp_path / "labels.csv"
        for content in (
            "",  # no header
            "frame\n1\n",  # wrong header
            "frame,phase\n",  # no rows
            "frame,phase\n1,0,9\n",  # too many fields
            "frame,phase\n1,zero\n",  # not an integer
            "frame,phase\n1,-2\n",  # negative phase
        ):
            path.write_text(content)
            with pytest.raises(FormatError) as exc:
                read_labels(path)
            assert exc.value.code == "bad_value"

    def test_empty_labels_rejected_on_write(self, tmp_path) -> None:
        with pytest.raises(FormatError):
            write_labels(tmp_path / "x.csv", np.zeros(0, dtype=np.int64))


class TestPredictionFiles:
    @staticmethod
    def _outputs():
        gen = np.random.default_rng(2)
        return [
            PhaseOutput.from_logits(i + 1, gen.normal(size=4), float(gen.uniform()))
            for i in range(6)
        ]

    def test_roundtrip_to_nine_decimals(self, tmp_path) -> None:
        outs = self._outputs()
        path = tmp_path / "pred.csv"
        write_predictions(path, outs)
        frames, phases, heat, conf = read_predictions(path)
        assert frames.tolist() == [o.frame for o in outs]
        assert phases.tolist() == [o.predicted_phase for o in outs]
        np.testing.assert_allclose(heat, [o.heat for o in outs], rtol=0, atol=5e-10)
        np.testing.assert_allclose(conf, [o.confidence for o in outs], rtol=0, atol=5e-10)

    def test_exact_text_layout(self, tmp_path) -> None:
        path = tmp_path / "pred.csv"
        write_predictions(path, self._outputs())
        lines = path.read_text().splitlines()
        assert lines[0] == "frame,phase,heat,confidence"
        row = re.compile(r"^\d+,\d+,\d\.\d{9},\d\.\d{9}$")
        assert all(row.match(line) for line in lines[1:])

    def test_malformed_prediction_files(self, tmp_path) -> None:
        path = tmp_path / "pred.csv"
        for content in (
            "",
            "frame,phase\n",
            "frame,phase,heat,confidence\n",
            "frame,phase,heat,confidence\n1,0,0.5\n",
            "frame,phase,heat,confidence\n1,0,x,0.5\n",
        ):
            path.write_text(content)
            with pytest.raises(FormatError) as exc:
                read_predictions(path)
            assert exc.value.code == "bad_value"
