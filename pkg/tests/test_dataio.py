"""JSONL frame/detection files: round trips, validation, atomic writes."""

from __future__ import annotations

import json
import os

import numpy as np
import pytest

from scenegnn.dataio import (
    FrameDataset,
    FrameRecord,
    FramesFileError,
    atomic_write_text,
    parse_detections,
    parse_frames,
    write_detections,
    write_frames,
)
from scenegnn.geometry import BoundingBox
from scenegnn.metrics import Detection
from scenegnn.scenegraph import Frame, SceneObject


def _dataset() -> FrameDataset:
    frames = [
        Frame(
            "a",
            (
                SceneObject(0, BoundingBox(0.1, 0.1, 0.3, 0.3)),
                SceneObject(2, BoundingBox(0.5, 0.5, 0.9, 0.7)),
            ),
        ),
        Frame("b", (SceneObject(1, BoundingBox(0.0, 0.0, 1.0, 1.0)),)),
    ]
    return FrameDataset(n_classes=3, records=[FrameRecord(frame=f) for f in frames])


class TestFramesRoundTrip:
    def test_round_trip_preserves_everything(self, tmp_path):
        path = str(tmp_path / "frames.jsonl")
        write_frames(path, _dataset())
        back = parse_frames(path)
        assert back.n_classes == 3
        assert [f.frame_id for f in back.frames] == ["a", "b"]
        orig = _dataset()
        for ra, rb in zip(orig.records, back.records):
            assert ra.frame == rb.frame

    def test_round_trip_with_validity(self, tmp_path):
        path = str(tmp_path / "frames.jsonl")
        ds = _dataset()
        ds.records[0].validity = np.array([True, False])
        ds.records[0].original_labels = np.array([0, 1], dtype=np.int64)
        write_frames(path, ds)
        back = parse_frames(path)
        np.testing.assert_array_equal(back.records[0].validity, [True, False])
        np.testing.assert_array_equal(back.records[0].original_labels, [0, 1])
        assert back.records[1].validity is None

    def test_detections_round_trip(self, tmp_path):
        path = str(tmp_path / "dets.jsonl")
        dets = [
            Detection("a", 1, BoundingBox(0.1, 0.2, 0.3, 0.4), 0.75),
            Detection("b", 0, BoundingBox(0.0, 0.0, 0.5, 0.5), 1.0),
        ]
        write_detections(path, dets)
        assert parse_detections(path) == dets

    def test_empty_detections_file(self, tmp_path):
        path = str(tmp_path / "dets.jsonl")
        write_detections(path, [])
        assert parse_detections(path) == []


class TestFramesValidation:
    def _write(self, tmp_path, lines: list[str]) -> str:
        path = str(tmp_path / "f.jsonl")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
        return path

    def test_missing_header(self, tmp_path):
        path = self._write(tmp_path, ['{"frame_id": "a", "objects": []}'])
        with pytest.raises(FramesFileError, match="line 1"):
            parse_frames(path)

    def test_empty_file(self, tmp_path):
        path = self._write(tmp_path, [""])
        with pytest.raises(FramesFileError, match="empty file"):
            parse_frames(path)

    def test_header_only_gives_empty_dataset(self, tmp_path):
        path = self._write(tmp_path, ['{"n_classes": 5, "format_version": 1}'])
        ds = parse_frames(path)
        assert ds.n_classes == 5 and ds.records == []

    def test_wrong_format_version(self, tmp_path):
        path = self._write(tmp_path, ['{"n_classes": 5, "format_version": 99}'])
        with pytest.raises(FramesFileError, match="format_version"):
            parse_frames(path)

    def test_class_id_out_of_range_reports_line(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                '{"n_classes": 3, "format_version": 1}',
                '{"frame_id": "a", "objects": [{"class_id": 3, "bbox": [0.1, 0.1, 0.2, 0.2]}]}',
            ],
        )
        with pytest.raises(FramesFileError, match=r"line 2.*out of range"):
            parse_frames(path)

    def test_duplicate_frame_id(self, tmp_path):
        row = '{"frame_id": "a", "objects": [{"class_id": 0, "bbox": [0.1, 0.1, 0.2, 0.2]}]}'
        path = self._write(
            tmp_path, ['{"n_classes": 3, "format_version": 1}', row, row]
        )
        with pytest.raises(FramesFileError, match=r"line 3.*duplicate"):
            parse_frames(path)

    def test_malformed_json_reports_line(self, tmp_path):
        path = self._write(
            tmp_path, ['{"n_classes": 3, "format_version": 1}', "{not json"]
        )
        with pytest.raises(FramesFileError, match="line 2"):
            parse_frames(path)

    def test_bad_bbox(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                '{"n_classes": 3, "format_version": 1}',
                '{"frame_id": "a", "objects": [{"class_id": 0, "bbox": [0.5, 0.5, 0.1]}]}',
            ],
        )
        with pytest.raises(FramesFileError, match="bbox"):
            parse_frames(path)

    def test_strict_rejects_unknown_fields(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                '{"n_classes": 3, "format_version": 1}',
                '{"frame_id": "a", "objects": [], "extra": 1}',
            ],
        )
        parse_frames(path)  # lenient mode accepts
        with pytest.raises(FramesFileError, match="unknown fields"):
            parse_frames(path, strict=True)

    def test_strict_rejects_unknown_object_fields(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                '{"n_classes": 3, "format_version": 1}',
                '{"frame_id": "a", "objects": [{"class_id": 0, "bbox": [0.1, 0.1, 0.2, 0.2], "score": 1}]}',
            ],
        )
        parse_frames(path)
        with pytest.raises(FramesFileError, match="unknown object fields"):
            parse_frames(path, strict=True)

    def test_blank_lines_skipped(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                '{"n_classes": 3, "format_version": 1}',
                "",
                '{"frame_id": "a", "objects": []}',
            ],
        )
        assert len(parse_frames(path).records) == 1


class TestAtomicWrite:
    def test_writes_content(self, tmp_path):
        path = str(tmp_path / "x.txt")
        atomic_write_text(path, "hello\n")
        with open(path) as f:
            assert f.read() == "hello\n"

    def test_overwrite_replaces_not_appends(self, tmp_path):
        path = str(tmp_path / "x.txt")
        atomic_write_text(path, "long old content\n")
        atomic_write_text(path, "new\n")
        with open(path) as f:
            assert f.read() == "new\n"

    def test_no_stray_temp_files(self, tmp_path):
        path = str(tmp_path / "x.txt")
        atomic_write_text(path, "data\n")
        assert os.listdir(tmp_path) == ["x.txt"]

    def test_failed_serialization_leaves_no_partial_file(self, tmp_path):
        # json.dumps fails before any bytes are written; target is untouched
        path = str(tmp_path / "x.json")
        atomic_write_text(path, "original\n")
        with pytest.raises(TypeError):
            atomic_write_text(path, json.dumps({"bad": object()}))
        with open(path) as f:
            assert f.read() == "original\n"
