"""Annotation and detection file ingestion.

The annotation layout is a minimal subset of the common detection-dataset
JSON: images, annotations with [x, y, w, h] boxes, and categories.
Detections use the same box convention plus a score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List

from .metrics import AnnotationSet, Box, Detection, DetectionSet


class AnnotationError(ValueError):
    pass


@dataclass
class AnnotationFile:
    images: List[dict] = field(default_factory=list)
    annotations: List[dict] = field(default_factory=list)
    categories: List[dict] = field(default_factory=list)

    def image_files(self) -> Dict[int, str]:
        return {im["id"]: im["file"] for im in self.images}

    def to_annotation_set(self) -> AnnotationSet:
        out = AnnotationSet()
        for im in self.images:
            out.by_image.setdefault(im["id"], [])
        for a in self.annotations:
            x, y, w, h = a["bbox"]
            out.add(a["image_id"], Box(x, y, x + w, y + h, a["category_id"]))
        return out


def load_annotations(path) -> AnnotationFile:
    with open(path) as f:
        doc = json.load(f)
    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise AnnotationError(f"annotation file missing {key!r} section")
    image_ids = {im["id"] for im in doc["images"]}
    if len(image_ids) != len(doc["images"]):
        raise AnnotationError("duplicate image ids")
    cat_ids = {c["id"] for c in doc["categories"]}
    for a in doc["annotations"]:
        if a["image_id"] not in image_ids:
            raise AnnotationError(f"annotation references unknown image "
                                  f"{a['image_id']}")
        if a["category_id"] not in cat_ids:
            raise AnnotationError(f"annotation references unknown category "
                                  f"{a['category_id']}")
        w, h = a["bbox"][2], a["bbox"][3]
        if w <= 0 or h <= 0:
            raise AnnotationError(f"degenerate bbox on image {a['image_id']}")
    return AnnotationFile(doc["images"], doc["annotations"], doc["categories"])


def load_detections(path) -> DetectionSet:
    with open(path) as f:
        doc = json.load(f)
    dets = doc["detections"] if isinstance(doc, dict) else doc
    out = DetectionSet()
    for d in dets:
        x, y, w, h = d["bbox"]
        out.add(d["image_id"],
                Detection(Box(x, y, x + w, y + h, d.get("category_id", 0)),
                          float(d["score"])))
    return out


def save_detections(dets: DetectionSet, path):
    records = []
    for img_id in sorted(dets.by_image):
        for d in dets.by_image[img_id]:
            b = d.box
            records.append({"image_id": img_id, "category_id": b.category,
                            "bbox": [b.x_min, b.y_min,
                                     b.x_max - b.x_min, b.y_max - b.y_min],
                            "score": d.score})
    with open(path, "w") as f:
        json.dump({"detections": records}, f, sort_keys=True, indent=2)
