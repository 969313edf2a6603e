"""Dataset splitting, clean/corrupted pairing, and the Adam training loop."""

from __future__ import annotations

from copy import deepcopy
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .corrupt import CorruptionConfig, corrupt_frame, derive_seed, frame_rng
from .metrics import evaluate_graphs
from .model import ModelConfig, ModelParams, init_model, predict
from .scenegraph import Frame, SceneGraph, build_graph


def split_dataset(
    frames: list[Frame],
    seed: int,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> tuple[list[Frame], list[Frame], list[Frame]]:
    """Seeded frame-level split; floor counts for train/val, remainder to test."""
    if len(frames) < 3:
        raise ValueError("need at least 3 frames to split")
    order = np.random.default_rng(derive_seed(seed, "split")).permutation(len(frames))
    n_train = int(len(frames) * ratios[0])
    n_val = int(len(frames) * ratios[1])
    shuffled = [frames[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train: n_train + n_val],
        shuffled[n_train + n_val:],
    )


def build_dataset(
    frames: list[Frame], config: ModelConfig, seed: int
) -> list[SceneGraph]:
    """One clean graph plus one corrupted twin per frame (1:1).

    Corruption happens after splitting, so a frame's twin can never leak
    across splits.
    """
    cc = CorruptionConfig(rho=config.rho, jitter_sigma=config.jitter_sigma, seed=seed)
    graphs: list[SceneGraph] = []
    for frame in frames:
        clean = build_graph(frame, config.k, config.n_classes)
        graphs.append(clean)
        bad, validity, original = corrupt_frame(
            frame, cc, frame_rng(cc, frame.frame_id), config.n_classes
        )
        g = build_graph(bad, config.k, config.n_classes)
        g.validity = validity
        g.original_labels = original
        graphs.append(g)
    return graphs


@dataclass
class EpochRecord:
    epoch: int
    total_loss: float
    bce: float
    ce: float
    val_validity_accuracy: float
    val_label_f1: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)

    def to_jsonable(self) -> list[dict]:
        return [vars(e) for e in self.epochs]


def _validation_metrics(
    graphs: list[SceneGraph], params: ModelParams, config: ModelConfig
) -> tuple[float, float]:
    if not graphs:
        return float("nan"), float("nan")
    report = evaluate_graphs(graphs, params, config)
    return report.validity_accuracy, report.label.weighted_f1


def train(
    train_graphs: list[SceneGraph],
    config: ModelConfig,
    val_graphs: list[SceneGraph] | None = None,
) -> tuple[ModelParams, ModelParams, TrainHistory]:
    """Fixed-epoch Adam training; returns (final, best-validation, history).

    Mini-batches are whole graphs; per-graph node-mean losses are averaged
    within each batch. Without a validation set the best checkpoint is the
    final one.
    """
    if not train_graphs:
        raise ValueError("empty training set")
    rng = np.random.default_rng(derive_seed(config.seed, "train"))
    params = init_model(config, np.random.default_rng(derive_seed(config.seed, "init")))
    state = nn.AdamState.for_params(params, lr=config.lr)
    history = TrainHistory()
    best_params = _clone(params)
    best_acc = -1.0

    n = len(train_graphs)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_losses, epoch_bce, epoch_ce = [], [], []
        for start in range(0, n, config.batch_size):
            graphs = [train_graphs[i] for i in order[start: start + config.batch_size]]
            batch = nn.make_batch(graphs, label_encoding=config.label_encoding)
            if config.ce_invalid_only:
                batch.ce_weights = batch.node_weights * ~batch.validity_gt
            cache = nn.full_forward(params, batch, config.msg_mode)
            bce, ce = nn.loss_components(cache, batch)
            loss = config.lam_valid * bce + config.lam_label * ce
            if not np.isfinite(loss):
                raise nn.NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            grads = nn.backward(
                params, cache, batch, config.msg_mode, config.lam_valid, config.lam_label
            )
            nn.adam_step(params, grads, state)
            epoch_losses.append(loss)
            epoch_bce.append(bce)
            epoch_ce.append(ce)

        val_acc, val_f1 = _validation_metrics(val_graphs or [], params, config)
        history.epochs.append(
            EpochRecord(
                epoch=epoch,
                total_loss=float(np.mean(epoch_losses)),
                bce=float(np.mean(epoch_bce)),
                ce=float(np.mean(epoch_ce)),
                val_validity_accuracy=val_acc,
                val_label_f1=val_f1,
            )
        )
        if val_graphs and val_acc >= best_acc:
            best_acc = val_acc
            best_params = _clone(params)

    if not val_graphs:
        best_params = _clone(params)
    return params, best_params, history


def _clone(params: ModelParams) -> ModelParams:
    return deepcopy(params)
