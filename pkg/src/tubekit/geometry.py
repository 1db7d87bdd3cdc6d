"""Axis-aligned box and half-open frame-interval arithmetic.

Everything here is pure and operates on immutable values; these primitives
underpin linking, refinement, suppression and evaluation.
"""

import math
from dataclasses import dataclass

from .errors import InvalidInputError


@dataclass(frozen=True, order=True)
class Box:
    """Axis-aligned box with real-valued corner coordinates, x1<=x2, y1<=y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise InvalidInputError(f"non-finite box coordinate: {self}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise InvalidInputError(f"inverted box: {self}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def center(self):
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def area(self):
        return self.width * self.height


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open frame interval [start, end), start < end, integer frames."""

    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise InvalidInputError(f"empty interval: [{self.start}, {self.end})")

    @property
    def length(self):
        return self.end - self.start

    def frames(self):
        return range(self.start, self.end)


def spatial_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0 when the union is degenerate."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def temporal_iou(a: Interval, b: Interval) -> float:
    """Intersection-over-union of two half-open frame intervals."""
    inter = min(a.end, b.end) - max(a.start, b.start)
    union = max(a.end, b.end) - min(a.start, b.start)
    if inter <= 0:
        return 0.0
    return inter / union


def enlarge(b: Box, factor: float, frame_bounds: Box) -> Box:
    """Scale width/height by `factor` about the box center, clamp to frame."""
    if factor < 1.0:
        raise InvalidInputError(f"enlarge factor must be >= 1, got {factor}")
    cx, cy = b.center
    hw = 0.5 * b.width * factor
    hh = 0.5 * b.height * factor
    return Box(
        max(frame_bounds.x1, cx - hw),
        max(frame_bounds.y1, cy - hh),
        min(frame_bounds.x2, cx + hw),
        min(frame_bounds.y2, cy + hh),
    )


def clamp_box(b: Box, frame_bounds: Box) -> Box:
    """Clip a box to the frame; degenerate result allowed when fully outside."""
    x1 = min(max(b.x1, frame_bounds.x1), frame_bounds.x2)
    x2 = min(max(b.x2, frame_bounds.x1), frame_bounds.x2)
    y1 = min(max(b.y1, frame_bounds.y1), frame_bounds.y2)
    y2 = min(max(b.y2, frame_bounds.y1), frame_bounds.y2)
    return Box(x1, y1, x2, y2)
