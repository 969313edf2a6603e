"""Procedural static-scene dataset: rigid world layout, egocentric crop views.

The world is a wall in [0, 1]^2 holding one anchored object per class. Each
frame is an axis-aligned crop+zoom window onto the wall, so relative layout
between any two classes is identical across frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corrupt import derive_seed
from .geometry import clamp_box
from .scenegraph import Frame, SceneObject

DEFAULT_GRID = 7
MIN_VISIBLE_FRACTION = 0.30
MAX_RETRIES = 100


@dataclass(frozen=True)
class LayoutTemplate:
    anchors: np.ndarray  # n_classes x 2 centers in world coords
    sizes: np.ndarray  # n_classes x 2 (w, h)
    n_classes: int
    seed: int


def gen_template(n_classes: int, seed: int, grid: int = DEFAULT_GRID) -> LayoutTemplate:
    """Jittered-grid placement: one object per class, min center separation
    of half a grid cell, log-uniform sizes."""
    if not 2 <= n_classes <= 64:
        raise ValueError("n_classes must be in [2, 64]")
    if n_classes > grid * grid:
        raise ValueError(f"{n_classes} classes exceed {grid}x{grid} grid capacity")
    rng = np.random.default_rng(derive_seed(seed, "template"))
    cell = 1.0 / grid
    cells = rng.permutation(grid * grid)[:n_classes]
    rows, cols = cells // grid, cells % grid
    centers = np.stack([(cols + 0.5) * cell, (rows + 0.5) * cell], axis=1)
    # jitter within +/- cell/4 keeps separation >= cell/2 between any two anchors
    anchors = centers + rng.uniform(-cell / 4, cell / 4, size=(n_classes, 2))
    sizes = np.exp(rng.uniform(math.log(0.04), math.log(0.14), size=(n_classes, 2)))
    return LayoutTemplate(anchors=anchors, sizes=sizes, n_classes=n_classes, seed=seed)


def _visible_fraction(
    x0: float, y0: float, x1: float, y1: float, wx0: float, wy0: float, wx1: float, wy1: float
) -> float:
    ix = max(0.0, min(x1, wx1) - max(x0, wx0))
    iy = max(0.0, min(y1, wy1) - max(y0, wy0))
    area = (x1 - x0) * (y1 - y0)
    return (ix * iy) / area if area > 0 else 0.0


def render_views(
    template: LayoutTemplate,
    n_frames: int,
    view_jitter: tuple[float, float] = (1.5, 3.0),
    dropout_prob: float = 0.0,
    seed: int = 0,
) -> list[Frame]:
    """Egocentric views as seeded random crop windows onto the world wall.

    Objects with less than 30% of their area inside the window are dropped,
    survivors are dropped independently with dropout_prob, and frames with
    fewer than two surviving objects are re-sampled (bounded retries).
    """
    if not 0.0 <= dropout_prob <= 0.5:
        raise ValueError("dropout_prob must be in [0, 0.5]")
    zoom_lo, zoom_hi = view_jitter
    if not 1.0 <= zoom_lo <= zoom_hi:
        raise ValueError("view_jitter must satisfy 1 <= lo <= hi")

    frames: list[Frame] = []
    for i in range(n_frames):
        frame_id = f"frame_{i:05d}"
        rng = np.random.default_rng(derive_seed(seed, f"view/{frame_id}"))
        objects = None
        for _ in range(MAX_RETRIES):
            zoom = rng.uniform(zoom_lo, zoom_hi)
            size = 1.0 / zoom
            ox = rng.uniform(0.0, 1.0 - size)
            oy = rng.uniform(0.0, 1.0 - size)
            candidate: list[SceneObject] = []
            for cls in range(template.n_classes):
                cx, cy = template.anchors[cls]
                w, h = template.sizes[cls]
                x0, y0, x1, y1 = cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2
                vis = _visible_fraction(x0, y0, x1, y1, ox, oy, ox + size, oy + size)
                if vis < MIN_VISIBLE_FRACTION:
                    continue
                if dropout_prob > 0.0 and rng.random() < dropout_prob:
                    continue
                box = clamp_box(
                    (x0 - ox) / size, (y0 - oy) / size, (x1 - ox) / size, (y1 - oy) / size
                )
                candidate.append(SceneObject(label_id=cls, bbox=box))
            if len(candidate) >= 2:
                objects = candidate
                break
        if objects is None:
            raise RuntimeError(
                f"could not render {frame_id}: retry budget exhausted "
                "(template/window parameters incompatible)"
            )
        frames.append(Frame(frame_id, tuple(objects)))
    return frames
