"""COCO-style Average Precision evaluation.

Reports AP at IoU 0.50 and 0.75 plus the mean over the 0.50:0.05:0.95
threshold grid, using 101-point interpolation of the precision-recall
curve.  Matching is greedy in score order with stable tie-breaking, so
results are deterministic.  There is no per-image detection cap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

IOU_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    category: int = 0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class Detection:
    box: Box
    score: float


@dataclass
class AnnotationSet:
    """Ground-truth boxes keyed by image id."""
    by_image: Dict[int, List[Box]] = field(default_factory=dict)

    def add(self, image_id: int, box: Box):
        self.by_image.setdefault(image_id, []).append(box)

    def categories(self):
        return {b.category for boxes in self.by_image.values() for b in boxes}


@dataclass
class DetectionSet:
    """Scored detections keyed by image id."""
    by_image: Dict[int, List[Detection]] = field(default_factory=dict)

    def add(self, image_id: int, det: Detection):
        self.by_image.setdefault(image_id, []).append(det)

    def categories(self):
        return {d.box.category for dets in self.by_image.values() for d in dets}


def iou(a: Box, b: Box) -> float:
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def match_and_score(dets: DetectionSet, gts: AnnotationSet, iou_thresh: float,
                    category: int = None):
    """Greedy TP/FP labelling at one IoU threshold.

    Returns (scores, is_tp) arrays sorted by descending score (stable on
    ties: image id then insertion order).  Each GT box matches at most one
    detection; a detection matches the highest-IoU unmatched GT of its own
    category with IoU >= thresh.
    """
    if not (0.0 < iou_thresh <= 1.0):
        raise ValueError("iou_thresh must be in (0, 1]")
    entries = []
    for img_id in sorted(dets.by_image):
        for idx, d in enumerate(dets.by_image[img_id]):
            if category is None or d.box.category == category:
                entries.append((-d.score, img_id, idx, d))
    entries.sort(key=lambda e: e[:3])

    matched = {}  # (img_id, gt_index) -> True
    scores, labels = [], []
    for _, img_id, _, det in entries:
        gt_boxes = gts.by_image.get(img_id, [])
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gt_boxes):
            if gt.category != det.box.category or (img_id, j) in matched:
                continue
            v = iou(det.box, gt)
            if v >= iou_thresh and v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0:
            matched[(img_id, best_j)] = True
            labels.append(True)
        else:
            labels.append(False)
        scores.append(det.score)
    return np.array(scores), np.array(labels, dtype=bool)


def average_precision(is_tp: np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from score-sorted TP/FP labels.

    Returns NaN when there are no ground truths and no detections (the
    caller excludes such cases from averages).
    """
    if n_gt == 0:
        return float("nan") if len(is_tp) == 0 else 0.0
    if len(is_tp) == 0:
        return 0.0
    tp = np.cumsum(is_tp)
    fp = np.cumsum(~np.asarray(is_tp, dtype=bool))
    precision = tp / (tp + fp)
    # recall grid r = j/100; the comparison recall >= r is done in exact
    # integer arithmetic (tp*100 >= j*n_gt) to avoid float boundary issues
    total = 0.0
    for j in range(101):
        mask = tp * 100 >= j * n_gt
        total += precision[mask].max() if mask.any() else 0.0
    return total / 101.0


def evaluate(dets: DetectionSet, gts: AnnotationSet) -> dict:
    """Per-category AP on the 0.50:0.05:0.95 grid, averaged over categories.

    Categories with no ground truth and no detections are excluded;
    detections in a category absent from the GT count as pure false
    positives (AP 0 for that category).
    """
    cats = sorted(gts.categories() | dets.categories())
    per_cat = {}
    for c in cats:
        n_gt = sum(1 for boxes in gts.by_image.values()
                   for b in boxes if b.category == c)
        aps = {}
        for t in IOU_GRID:
            _, labels = match_and_score(dets, gts, t, category=c)
            aps[t] = average_precision(labels, n_gt)
        if all(np.isnan(v) for v in aps.values()):
            continue
        per_cat[c] = {
            "AP50": aps[0.5], "AP75": aps[0.75],
            "AP": float(np.mean([aps[t] for t in IOU_GRID])),
        }
    if not per_cat:
        return {"AP50": 0.0, "AP75": 0.0, "AP": 0.0, "per_category": {}}
    return {
        "AP50": float(np.mean([v["AP50"] for v in per_cat.values()])),
        "AP75": float(np.mean([v["AP75"] for v in per_cat.values()])),
        "AP": float(np.mean([v["AP"] for v in per_cat.values()])),
        "per_category": {str(c): v for c, v in sorted(per_cat.items())},
    }


def results_json(results: dict) -> str:
    return json.dumps(results, sort_keys=True, indent=2)
