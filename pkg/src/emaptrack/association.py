"""IoU-based optimal assignment of predicted track boxes to detections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Detection:
    frame: int
    box: Tuple[float, float, float, float]  # left, top, right, bottom
    score: float = 1.0
    label: str = "Car"
    depth: float | None = None  # optional per-detection range in metres

    def __post_init__(self):
        l, t, r, b = self.box
        if not (l <= r and t <= b):
            raise ValueError(f"invalid box {self.box}: corners out of order")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"confidence {self.score} outside [0, 1]")


@dataclass
class AssociationResult:
    matches: List[Tuple[int, int]] = field(default_factory=list)  # (track id, det index)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_detections: List[int] = field(default_factory=list)


def iou(a, b) -> float:
    """Intersection over union of two (l, t, r, b) boxes; 0 for empty union."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0:
        return 0.0
    return float(inter / union)


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out


def match_weights(iou_mat: np.ndarray, admissible: np.ndarray) -> np.ndarray:
    """IoU where a pair may match, 0 elsewhere."""
    return np.where(admissible, iou_mat, 0.0)


def max_weight_matching(weights: np.ndarray) -> List[Tuple[int, int]]:
    """Row/column pairs of a maximum total-weight matching over positive entries.

    Rows and columns are taken in the given order, so callers control the
    deterministic tie-breaking by how they order them.
    """
    if weights.size == 0:
        return []
    rows, cols = linear_sum_assignment(1.0 - weights)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if weights[r, c] > 0]


def associate(
    track_ids: Sequence[int],
    track_boxes,
    track_labels: Sequence[str],
    detections: Sequence[Detection],
    iou_min: float = 0.3,
) -> AssociationResult:
    """Maximise total IoU over class-consistent pairs with IoU >= ``iou_min``."""
    order = sorted(range(len(track_ids)), key=lambda i: track_ids[i])
    ids = [track_ids[i] for i in order]
    if not ids or not detections:
        return AssociationResult([], ids, list(range(len(detections))))

    boxes = np.asarray(track_boxes, dtype=float).reshape(-1, 4)[order]
    labels = [track_labels[i] for i in order]
    det_boxes = np.array([d.box for d in detections], dtype=float)
    ious = iou_matrix(boxes, det_boxes)
    same_class = np.array([[lab == d.label for d in detections] for lab in labels])
    weights = match_weights(ious, same_class & (ious >= iou_min))

    pairs = max_weight_matching(weights)
    matched_rows = {r for r, _ in pairs}
    matched_cols = {c for _, c in pairs}
    return AssociationResult(
        matches=sorted((ids[r], c) for r, c in pairs),
        unmatched_tracks=[ids[r] for r in range(len(ids)) if r not in matched_rows],
        unmatched_detections=[c for c in range(len(detections)) if c not in matched_cols],
    )
