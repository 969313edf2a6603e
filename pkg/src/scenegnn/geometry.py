"""Axis-aligned bounding-box geometry in normalized image coordinates.

Coordinates live in [0, 1] with origin at the top-left corner, x pointing
right and y pointing down. Angles therefore increase clockwise on screen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Ratio reported when the reference box has zero area; keeps features finite.
SIZE_RATIO_CAP = 1e6


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate {name}={v!r}")
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"coordinate {name}={v} outside [0, 1]")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"inverted box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0


def clamp_box(x_min: float, y_min: float, x_max: float, y_max: float) -> BoundingBox:
    """Re-order corners and clamp them into [0, 1]."""
    lo_x, hi_x = sorted((x_min, x_max))
    lo_y, hi_y = sorted((y_min, y_max))
    clip = lambda v: min(1.0, max(0.0, v))
    return BoundingBox(clip(lo_x), clip(lo_y), clip(hi_x), clip(hi_y))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class EdgeGeometry:
    """Pairwise spatial relation directed from box a (node i) to box b (node j)."""

    dx: float
    dy: float
    dist: float
    theta_deg: float
    iou: float
    size_ratio: float

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.dx, self.dy, self.dist, self.theta_deg, self.iou, self.size_ratio)


def pairwise_geometry(a: BoundingBox, b: BoundingBox) -> EdgeGeometry:
    """Displacement, distance, angle (degrees), IoU and area ratio from a to b.

    theta is atan2(dy, dx) in degrees mapped into (-180, 180]; atan2(0, 0)
    is taken as 0 for coincident centers.
    """
    ax, ay = a.center
    bx, by = b.center
    dx = bx - ax
    dy = by - ay
    dist = math.hypot(dx, dy)
    if dx == 0.0 and dy == 0.0:
        theta = 0.0
    else:
        theta = math.degrees(math.atan2(dy, dx))
        if theta <= -180.0:
            theta += 360.0
    area_a = a.area
    if area_a <= 0.0:
        ratio = SIZE_RATIO_CAP
    else:
        ratio = b.area / area_a
    return EdgeGeometry(dx, dy, dist, theta, iou(a, b), ratio)
