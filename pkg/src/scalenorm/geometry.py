"""Box geometry and scale primitives shared by every pipeline stage.

All operations here are pure functions over immutable values, so they are
safe to call concurrently. Boxes live in continuous (x, y, w, h) pixel
coordinates; only image dimensions are ever rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner (x, y) plus positive width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w!r}, h={self.h!r}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin outside image: x={self.x!r}, y={self.y!r}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Instance:
    """Ground-truth object: box, category, and COCO-style crowd flag."""

    bbox: BBox
    category_id: int
    iscrowd: bool = False
    id: int = 0
    image_id: int = 0

    def __post_init__(self) -> None:
        if self.category_id < 1:
            raise ValueError(f"instance {self.id}: category_id must be >= 1")


@dataclass(frozen=True)
class Detection:
    """Scored predicted box. resolution_index is -1 unless pyramid-sourced."""

    bbox: BBox
    category_id: int
    score: float
    image_id: int = 0
    resolution_index: int = -1

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0, 1]: {self.score!r}")


@dataclass(frozen=True)
class ScaleRange:
    """Closed scale interval [lower, upper]; upper may be math.inf."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if self.lower < 0 or not self.lower < self.upper:
            raise ValueError(f"invalid scale range [{self.lower!r}, {self.upper!r}]")

    def contains(self, scale: float) -> bool:
        return self.lower <= scale <= self.upper

    def to_pair(self) -> list[float | None]:
        """JSON-friendly form; an unbounded upper end becomes None."""
        return [self.lower, None if math.isinf(self.upper) else self.upper]

    @classmethod
    def from_pair(cls, pair) -> "ScaleRange":
        lower, upper = pair
        return cls(float(lower), math.inf if upper is None else float(upper))


@dataclass(frozen=True)
class PyramidSpec:
    """Ordered set of image scaling factors, one per pyramid resolution."""

    factors: tuple[float, ...]

    def __post_init__(self) -> None:
        factors = tuple(float(f) for f in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise ValueError("pyramid needs at least one scaling factor")
        if any(f <= 0 for f in factors):
            raise ValueError(f"scaling factors must be positive: {factors}")
        if len(set(factors)) != len(factors):
            raise ValueError(f"duplicate scaling factors: {factors}")

    def __iter__(self):
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)


def instance_scale(box: BBox, factor: float = 1.0) -> float:
    """Scale of a box after resizing by `factor`: factor * sqrt(w * h)."""
    return factor * math.sqrt(box.w * box.h)


def resize_plan(height: int, width: int, factor: float) -> tuple[int, int]:
    """Target (height, width) of an image resized by `factor`, each at least 1px."""
    return max(1, round(height * factor)), max(1, round(width * factor))


def project_box(box: BBox, factor: float) -> BBox:
    """Transport a box between resolutions by scaling all four coordinates."""
    return BBox(box.x * factor, box.y * factor, box.w * factor, box.h * factor)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    if iw <= 0:
        return 0.0
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)
