"""JSON-lines dataset formats and atomic file writing."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox
from .metrics import Detection
from .scenegraph import Frame, SceneObject

FRAMES_FORMAT_VERSION = 1

_FRAME_KEYS = {"frame_id", "objects"}
_OBJECT_KEYS = {"class_id", "bbox", "validity", "original_label"}
_DETECTION_KEYS = {"frame_id", "class_id", "bbox", "confidence"}


class FramesFileError(ValueError):
    """Malformed frames/detections file; message carries the line number."""


@dataclass
class FrameRecord:
    frame: Frame
    validity: np.ndarray | None = None  # per-object, True = unmodified
    original_labels: np.ndarray | None = None


@dataclass
class FrameDataset:
    n_classes: int
    records: list[FrameRecord]

    @property
    def frames(self) -> list[Frame]:
        return [r.frame for r in self.records]


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file and rename; interrupted runs never truncate."""
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_bbox(raw, line_no: int) -> BoundingBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise FramesFileError(f"line {line_no}: bbox must be a list of 4 floats")
    try:
        return BoundingBox(*(float(v) for v in raw))
    except (TypeError, ValueError) as exc:
        raise FramesFileError(f"line {line_no}: invalid bbox: {exc}") from exc


def parse_frames(path: str, strict: bool = False) -> FrameDataset:
    """Read a frames JSONL file (header record first); errors carry line numbers."""
    records: list[FrameRecord] = []
    n_classes: int | None = None
    seen_ids: set[str] = set()
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FramesFileError(f"line {line_no}: malformed JSON: {exc}") from exc
            if line_no == 1:
                if not isinstance(obj, dict) or "n_classes" not in obj:
                    raise FramesFileError("line 1: missing header {n_classes, format_version}")
                if obj.get("format_version") != FRAMES_FORMAT_VERSION:
                    raise FramesFileError(
                        f"line 1: unsupported format_version {obj.get('format_version')!r}"
                    )
                n_classes = int(obj["n_classes"])
                if n_classes < 2:
                    raise FramesFileError("line 1: n_classes must be >= 2")
                continue
            records.append(_parse_frame_line(obj, line_no, n_classes, strict, seen_ids))
    if n_classes is None:
        raise FramesFileError("empty file: missing header record")
    return FrameDataset(n_classes=n_classes, records=records)


def _parse_frame_line(obj, line_no, n_classes, strict, seen_ids) -> FrameRecord:
    if not isinstance(obj, dict):
        raise FramesFileError(f"line {line_no}: expected a JSON object")
    if strict:
        extra = set(obj) - _FRAME_KEYS
        if extra:
            raise FramesFileError(f"line {line_no}: unknown fields {sorted(extra)}")
    try:
        frame_id = str(obj["frame_id"])
        raw_objects = obj["objects"]
    except KeyError as exc:
        raise FramesFileError(f"line {line_no}: missing field {exc}") from exc
    if frame_id in seen_ids:
        raise FramesFileError(f"line {line_no}: duplicate frame_id {frame_id!r}")
    seen_ids.add(frame_id)

    objects: list[SceneObject] = []
    validity: list[bool] = []
    original: list[int] = []
    has_validity = False
    for o in raw_objects:
        if strict:
            extra = set(o) - _OBJECT_KEYS
            if extra:
                raise FramesFileError(f"line {line_no}: unknown object fields {sorted(extra)}")
        try:
            class_id = int(o["class_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FramesFileError(f"line {line_no}: bad class_id: {exc}") from exc
        if not 0 <= class_id < n_classes:
            raise FramesFileError(
                f"line {line_no}: class_id {class_id} out of range [0, {n_classes})"
            )
        bbox = _parse_bbox(o.get("bbox"), line_no)
        objects.append(SceneObject(label_id=class_id, bbox=bbox))
        if "validity" in o or "original_label" in o:
            has_validity = True
        validity.append(bool(o.get("validity", True)))
        orig = int(o.get("original_label", class_id))
        if not 0 <= orig < n_classes:
            raise FramesFileError(f"line {line_no}: original_label {orig} out of range")
        original.append(orig)

    return FrameRecord(
        frame=Frame(frame_id, tuple(objects)),
        validity=np.array(validity, dtype=bool) if has_validity else None,
        original_labels=np.array(original, dtype=np.int64) if has_validity else None,
    )


def frames_to_jsonl(
    dataset: FrameDataset,
) -> str:
    lines = [
        json.dumps({"n_classes": dataset.n_classes, "format_version": FRAMES_FORMAT_VERSION})
    ]
    for rec in dataset.records:
        objs = []
        for i, o in enumerate(rec.frame.objects):
            entry = {
                "class_id": int(o.label_id),
                "bbox": [o.bbox.x_min, o.bbox.y_min, o.bbox.x_max, o.bbox.y_max],
            }
            if rec.validity is not None:
                entry["validity"] = bool(rec.validity[i])
                entry["original_label"] = int(rec.original_labels[i])
            objs.append(entry)
        lines.append(json.dumps({"frame_id": rec.frame.frame_id, "objects": objs}))
    return "\n".join(lines) + "\n"


def write_frames(path: str, dataset: FrameDataset) -> None:
    atomic_write_text(path, frames_to_jsonl(dataset))


def parse_detections(path: str, strict: bool = False) -> list[Detection]:
    detections: list[Detection] = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FramesFileError(f"line {line_no}: malformed JSON: {exc}") from exc
            if strict:
                extra = set(obj) - _DETECTION_KEYS
                if extra:
                    raise FramesFileError(f"line {line_no}: unknown fields {sorted(extra)}")
            try:
                det = Detection(
                    frame_id=str(obj["frame_id"]),
                    class_id=int(obj["class_id"]),
                    bbox=_parse_bbox(obj.get("bbox"), line_no),
                    confidence=float(obj["confidence"]),
                )
            except KeyError as exc:
                raise FramesFileError(f"line {line_no}: missing field {exc}") from exc
            except ValueError as exc:
                raise FramesFileError(f"line {line_no}: {exc}") from exc
            detections.append(det)
    return detections


def detections_to_jsonl(detections: list[Detection]) -> str:
    lines = [
        json.dumps(
            {
                "frame_id": d.frame_id,
                "class_id": int(d.class_id),
                "bbox": [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max],
                "confidence": d.confidence,
            }
        )
        for d in detections
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_detections(path: str, detections: list[Detection]) -> None:
    atomic_write_text(path, detections_to_jsonl(detections))
