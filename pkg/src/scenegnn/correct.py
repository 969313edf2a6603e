"""Post-processing of detector outputs: flag invalid labels, emit corrections."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .corrupt import CorruptionConfig, corrupt_frame, derive_seed, frame_rng
from .metrics import Detection
from .model import ModelConfig, ModelParams, predict
from .scenegraph import Frame, SceneObject, build_graph


@dataclass
class CorrectionRecord:
    frame_id: str
    node_index: int
    original_class: int
    corrected_class: int
    validity_score: float
    applied: bool
    note: str = ""


def correct_detections(
    detections: list[Detection],
    params: ModelParams,
    config: ModelConfig,
    k: int | str | None = None,
    tau: float | None = None,
) -> tuple[list[Detection], list[CorrectionRecord]]:
    """Replace the class of invalid-flagged detections with the label head's
    argmax; boxes and confidences pass through untouched.

    Single-detection frames pass through unchanged (degenerate graph).
    """
    k = config.k if k is None else k
    tau = config.validity_threshold if tau is None else tau

    by_frame: dict[str, list[tuple[int, Detection]]] = defaultdict(list)
    for idx, det in enumerate(detections):
        by_frame[det.frame_id].append((idx, det))

    corrected: list[Detection | None] = [None] * len(detections)
    records: list[CorrectionRecord] = []
    for frame_id, items in by_frame.items():
        if len(items) == 1:
            idx, det = items[0]
            corrected[idx] = det
            records.append(
                CorrectionRecord(
                    frame_id=frame_id,
                    node_index=0,
                    original_class=det.class_id,
                    corrected_class=det.class_id,
                    validity_score=1.0,
                    applied=False,
                    note="single-detection frame, passthrough",
                )
            )
            continue

        frame = Frame(
            frame_id,
            tuple(SceneObject(det.class_id, det.bbox) for _, det in items),
        )
        graph = build_graph(frame, k, config.n_classes)
        pred = predict(graph, params, config)
        is_invalid = pred.validity_prob < tau
        for node, (idx, det) in enumerate(items):
            new_class = int(pred.corrected_label[node])
            applied = bool(is_invalid[node]) and new_class != det.class_id
            out_class = new_class if bool(is_invalid[node]) else det.class_id
            corrected[idx] = Detection(
                frame_id=det.frame_id,
                class_id=out_class,
                bbox=det.bbox,
                confidence=det.confidence,
            )
            records.append(
                CorrectionRecord(
                    frame_id=frame_id,
                    node_index=node,
                    original_class=det.class_id,
                    corrected_class=out_class,
                    validity_score=float(pred.validity_prob[node]),
                    applied=applied,
                )
            )
    return list(corrected), records


def simulate_detector(
    frames: list[Frame],
    n_classes: int,
    rho_det: int = 3,
    sigma_det: float = 0.01,
    seed: int = 0,
) -> list[Detection]:
    """Detector-error stand-in: corrupt ground-truth frames and attach
    Uniform(0.5, 1) confidences."""
    cc = CorruptionConfig(rho=rho_det, jitter_sigma=sigma_det, seed=seed)
    detections: list[Detection] = []
    for frame in frames:
        noisy, _, _ = corrupt_frame(frame, cc, frame_rng(cc, frame.frame_id), n_classes)
        conf_rng = np.random.default_rng(
            derive_seed(seed, f"detconf/{frame.frame_id}")
        )
        for obj in noisy.objects:
            detections.append(
                Detection(
                    frame_id=frame.frame_id,
                    class_id=obj.label_id,
                    bbox=obj.bbox,
                    confidence=float(conf_rng.uniform(0.5, 1.0)),
                )
            )
    return detections
