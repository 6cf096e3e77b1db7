"""Test-phase multi-resolution fusion: range gating, projection, soft suppression.

Predictions from each pyramid resolution are filtered by the shared scale
range (measured in the resized image where the detector produced them),
projected back to original-image coordinates, pooled, and de-duplicated with
Soft-NMS. Everything is deterministic: candidates are processed in the total
order (score desc, resolution_index asc, box lexicographic, category).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Detection, ScaleRange, instance_scale, project_box

UNBOUNDED_RANGE = ScaleRange(0.0, math.inf)


@dataclass(frozen=True)
class SoftNmsConfig:
    """Suppression settings: gaussian decay exp(-iou^2 / sigma), linear decay
    1 - iou past `iou_threshold`, or hard (classic NMS) zeroing past it.
    Rescored detections falling below `score_floor` are dropped."""

    method: str = "gaussian"
    sigma: float = 0.5
    iou_threshold: float = 0.3
    score_floor: float = 0.001

    def __post_init__(self) -> None:
        if self.method not in ("gaussian", "linear", "hard"):
            raise ValueError(f"unknown suppression method: {self.method!r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive: {self.sigma!r}")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold outside (0, 1): {self.iou_threshold!r}")
        if not 0.0 <= self.score_floor < 1.0:
            raise ValueError(f"score_floor outside [0, 1): {self.score_floor!r}")


def _det_order_key(det: Detection):
    b = det.bbox
    return (-det.score, det.resolution_index, b.x, b.y, b.w, b.h, det.category_id)


def gate_predictions(
    dets: list[Detection], factor: float, scale_range: ScaleRange
) -> list[Detection]:
    """Keep detections whose resized-image scale is in range; project the
    survivors to original-image coordinates. Input order is preserved."""
    if factor <= 0:
        raise ValueError(f"scaling factor must be positive: {factor!r}")
    kept = []
    for det in dets:
        if scale_range.contains(instance_scale(det.bbox)):
            kept.append(replace(det, bbox=project_box(det.bbox, 1.0 / factor)))
    return kept


def _decay_factors(overlaps: np.ndarray, cfg: SoftNmsConfig) -> np.ndarray:
    if cfg.method == "gaussian":
        return np.exp(-(overlaps * overlaps) / cfg.sigma)
    if cfg.method == "linear":
        return np.where(overlaps > cfg.iou_threshold, 1.0 - overlaps, 1.0)
    return np.where(overlaps > cfg.iou_threshold, 0.0, 1.0)


def _suppress_group(group: list[Detection], cfg: SoftNmsConfig) -> list[Detection]:
    # Greedy pass over one category: pick the highest current score (ties
    # resolve to the earliest candidate in the deterministic input order),
    # decay everyone else by overlap with the pick, drop below the floor.
    n = len(group)
    if n == 1:
        return list(group)
    x1 = np.array([d.bbox.x for d in group])
    y1 = np.array([d.bbox.y for d in group])
    x2 = np.array([d.bbox.x2 for d in group])
    y2 = np.array([d.bbox.y2 for d in group])
    area = (x2 - x1) * (y2 - y1)
    scores = np.array([d.score for d in group])
    active = np.ones(n, dtype=bool)

    picked: list[tuple[int, float]] = []
    while active.any():
        i = int(np.argmax(np.where(active, scores, -1.0)))
        picked.append((i, float(scores[i])))
        active[i] = False
        if not active.any():
            break
        iw = np.minimum(x2, x2[i]) - np.maximum(x1, x1[i])
        ih = np.minimum(y2, y2[i]) - np.maximum(y1, y1[i])
        inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
        overlaps = inter / (area + area[i] - inter)
        scores = np.where(active, scores * _decay_factors(overlaps, cfg), scores)
        active &= scores >= cfg.score_floor
    return [replace(group[i], score=s) for i, s in picked]


def soft_nms(dets: list[Detection], cfg: SoftNmsConfig | None = None) -> list[Detection]:
    """Greedy score-decay suppression, run independently per category.

    Never raises a score; the top-scoring input always survives unchanged.
    Output is sorted by final score descending (deterministic tie-break).
    """
    cfg = cfg or SoftNmsConfig()
    out: list[Detection] = []
    for cat in sorted({d.category_id for d in dets}):
        group = sorted((d for d in dets if d.category_id == cat), key=_det_order_key)
        out.extend(_suppress_group(group, cfg))
    out.sort(key=_det_order_key)
    return out


def fuse_multiscale(
    per_resolution: list[tuple[float, list[Detection]]],
    scale_range: ScaleRange,
    cfg: SoftNmsConfig | None = None,
    top_k: int | None = 100,
) -> list[Detection]:
    """Gate each resolution's detections, pool them, and suppress duplicates.

    The pooled list is sorted deterministically before suppression, so the
    result does not depend on the order resolutions are supplied in. When
    `top_k` is set, only the top-scoring detections survive.
    """
    pooled: list[Detection] = []
    for factor, dets in per_resolution:
        pooled.extend(gate_predictions(dets, factor, scale_range))
    pooled.sort(key=_det_order_key)
    fused = soft_nms(pooled, cfg)
    if top_k is not None:
        fused = fused[:top_k]
    return fused
