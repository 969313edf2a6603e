"""Multi-task network assembly, prediction, and checkpoint serialization."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .nn import ModelParams, PARAM_FIELDS, param_items
from .scenegraph import ALL_NEIGHBORS, SceneGraph

CHECKPOINT_MAGIC = b"#scenegnn-checkpoint\n"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


class CheckpointFormatError(CheckpointError):
    """File is not a readable checkpoint (truncated, bad magic, bad header)."""


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


class ConfigMismatchError(ValueError):
    """Graph and checkpoint were built with incompatible settings."""


@dataclass
class ModelConfig:
    n_classes: int = 39
    hidden_dim: int = 64
    k: int | str = 5  # neighbourhood size or "all"
    rho: int = 1  # anomaly ratio used when building training data
    label_encoding: str = "onehot"  # scalar | onehot
    msg_mode: str = nn.MSG_NODES_EDGES  # nodes | nodes+edges
    lam_valid: float = 1.0
    lam_label: float = 2.0
    validity_threshold: float = 0.5
    lr: float = 0.001
    epochs: int = 30
    batch_size: int = 16
    jitter_sigma: float = 0.01
    ce_invalid_only: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if not 0.0 < self.validity_threshold < 1.0:
            raise ValueError("validity_threshold must be in (0, 1)")
        if self.lam_valid < 0 or self.lam_label < 0:
            raise ValueError("loss weights must be >= 0")
        if self.label_encoding not in ("scalar", "onehot"):
            raise ValueError(f"unknown label_encoding {self.label_encoding!r}")
        if self.msg_mode not in (nn.MSG_NODES, nn.MSG_NODES_EDGES):
            raise ValueError(f"unknown msg_mode {self.msg_mode!r}")
        if self.k != ALL_NEIGHBORS:
            self.k = int(self.k)
            if self.k < 1:
                raise ValueError("k must be >= 1 or 'all'")

    @property
    def input_dim(self) -> int:
        return 5 if self.label_encoding == "scalar" else 4 + self.n_classes


def init_model(config: ModelConfig, rng: np.random.Generator | None = None) -> ModelParams:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return nn.init_params(
        config.input_dim, config.hidden_dim, config.n_classes, config.msg_mode, rng
    )


def _check_compatible(graph: SceneGraph, config: ModelConfig) -> None:
    if graph.n_classes != config.n_classes:
        raise ConfigMismatchError(
            f"graph built with n_classes={graph.n_classes}, "
            f"model expects {config.n_classes}"
        )


def model_forward(
    graph: SceneGraph, params: ModelParams, config: ModelConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Two stacked SAGE layers plus both heads; returns (validity_prob,
    class_probs) with probability rows summing to 1."""
    _check_compatible(graph, config)
    batch = nn.make_batch([graph], label_encoding=config.label_encoding)
    cache = nn.full_forward(params, batch, config.msg_mode)
    return cache.validity_prob, nn.softmax(cache.class_logits)


@dataclass
class Prediction:
    is_invalid: np.ndarray  # N bools
    corrected_label: np.ndarray  # N ints, argmax of the label head
    confidence: np.ndarray  # N floats, max class probability
    validity_prob: np.ndarray


def predict(graph: SceneGraph, params: ModelParams, config: ModelConfig) -> Prediction:
    v_prob, class_probs = model_forward(graph, params, config)
    return Prediction(
        is_invalid=v_prob < config.validity_threshold,
        corrected_label=np.argmax(class_probs, axis=1),  # ties: lowest index
        confidence=np.max(class_probs, axis=1),
        validity_prob=v_prob,
    )


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    format_version: int = CHECKPOINT_VERSION
    metadata: dict = field(default_factory=dict)


def save_checkpoint(
    params: ModelParams,
    config: ModelConfig,
    path: str,
    metadata: dict | None = None,
) -> None:
    """Self-describing header followed by little-endian float64 blocks in
    PARAM_FIELDS order; written atomically."""
    items = param_items(params)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "metadata": metadata or {},
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in items],
    }
    payload = json.dumps(header, sort_keys=True).encode() + b"\n"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(payload)
            for _, arr in items:
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError(f"{path}: not a scenegnn checkpoint")
    rest = blob[len(CHECKPOINT_MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise CheckpointFormatError(f"{path}: truncated header")
    try:
        header = json.loads(rest[: nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {header.get('format_version')!r}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    try:
        config = ModelConfig(**header["config"])
    except (TypeError, KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: bad config: {exc}") from exc

    expected_names = [f"{o}.{a}" for o, a in PARAM_FIELDS]
    tensors = header.get("tensors", [])
    if [t.get("name") for t in tensors] != expected_names:
        raise CheckpointDimensionError(f"{path}: unexpected tensor list")

    body = rest[nl + 1:]
    arrays = {}
    offset = 0
    for t in tensors:
        shape = tuple(int(s) for s in t["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = body[offset: offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointFormatError(f"{path}: truncated parameter block {t['name']}")
        arrays[t["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise CheckpointFormatError(f"{path}: trailing bytes after parameters")

    params = init_model(config)
    for (obj, attr), name in zip(PARAM_FIELDS, expected_names):
        current = getattr(getattr(params, obj), attr)
        loaded = arrays[name]
        if loaded.shape != current.shape:
            raise CheckpointDimensionError(
                f"{path}: {name} has shape {loaded.shape}, expected {current.shape}"
            )
        if not np.all(np.isfinite(loaded)):
            raise CheckpointFormatError(f"{path}: non-finite values in {name}")
        setattr(getattr(params, obj), attr, loaded)
    return Checkpoint(
        config=config,
        params=params,
        format_version=header["format_version"],
        metadata=header.get("metadata", {}),
    )
