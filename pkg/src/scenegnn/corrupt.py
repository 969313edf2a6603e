"""Synthetic negative samples: label swaps plus Gaussian corner jitter."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .geometry import clamp_box
from .scenegraph import Frame, SceneObject


@dataclass(frozen=True)
class CorruptionConfig:
    rho: int = 1  # max objects modified per frame
    jitter_sigma: float = 0.01  # corner noise std, normalized units
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


def derive_seed(master_seed: int, name: str) -> int:
    """Stable 64-bit stream seed from a master seed and a stream name."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def frame_rng(cfg: CorruptionConfig, frame_id: str) -> np.random.Generator:
    """Independent per-frame stream so parallel corruption is order-free."""
    return np.random.default_rng(derive_seed(cfg.seed, f"corrupt/{frame_id}"))


def corrupt_frame(
    frame: Frame,
    cfg: CorruptionConfig,
    rng: np.random.Generator,
    n_classes: int,
) -> tuple[Frame, np.ndarray, np.ndarray]:
    """Corrupt up to rho objects; returns (frame, validity, original_labels).

    Draws m ~ Uniform{1..min(rho, N)}, picks m distinct objects, swaps each
    label to a different uniformly-drawn class and jitters the four corner
    coordinates with N(0, sigma^2) noise (re-ordered and clamped to [0, 1]).
    rho = 0 is a no-op.
    """
    if len(frame.objects) == 0:
        raise ValueError("cannot corrupt an empty frame")
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")

    n = len(frame.objects)
    original = np.array([o.label_id for o in frame.objects], dtype=np.int64)
    validity = np.ones(n, dtype=bool)
    if cfg.rho == 0:
        return frame, validity, original

    m = int(rng.integers(1, min(cfg.rho, n) + 1))
    selected = rng.choice(n, size=m, replace=False)
    objects = list(frame.objects)
    for i in selected:
        i = int(i)
        old = objects[i].label_id
        new = int(rng.integers(0, n_classes - 1))
        if new >= old:
            new += 1
        box = objects[i].bbox
        if cfg.jitter_sigma > 0.0:
            noise = rng.normal(0.0, cfg.jitter_sigma, size=4)
            box = clamp_box(
                box.x_min + noise[0],
                box.y_min + noise[1],
                box.x_max + noise[2],
                box.y_max + noise[3],
            )
        objects[i] = SceneObject(label_id=new, bbox=box)
        validity[i] = False

    return Frame(frame.frame_id, tuple(objects)), validity, original
