"""IoU and CorLoc over prediction/ground-truth sets.

An image is correctly localized when the single predicted box has IoU
strictly greater than 0.5 with at least one of its ground-truth boxes.
CorLoc is the fraction of correctly localized images.  Boxes use
exclusive-style float pixel coordinates, so widths are plain differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import InvalidBox, MissingPrediction, UnknownImageId
from .feature_io import Box, GroundTruth

CORLOC_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class PerImageResult:
    image_id: str
    best_iou: float
    correct: bool


@dataclass(frozen=True)
class EvalReport:
    """CorLoc summary plus the per-image breakdown, ordered by image_id."""

    corloc: float
    num_images: int
    num_correct: int
    per_image: tuple[PerImageResult, ...]

    def to_json(self) -> str:
        return json.dumps({
            "corloc": self.corloc,
            "num_images": self.num_images,
            "num_correct": self.num_correct,
            "per_image": [{"image_id": r.image_id,
                           "best_iou": r.best_iou,
                           "correct": r.correct}
                          for r in self.per_image],
        }, indent=2)

    def to_table(self) -> str:
        id_width = max([len("image_id")] + [len(r.image_id) for r in self.per_image])
        lines = [f"{'image_id':<{id_width}}  {'best_iou':>8}  correct"]
        for r in self.per_image:
            lines.append(f"{r.image_id:<{id_width}}  {r.best_iou:>8.4f}  "
                         f"{'yes' if r.correct else 'no'}")
        lines.append(f"CorLoc: {self.corloc:.4f} "
                     f"({self.num_correct}/{self.num_images})")
        return "\n".join(lines)


def _check_box(box: Box, name: str) -> None:
    x0, y0, x1, y1 = box
    if not all(math.isfinite(v) for v in box) or x1 <= x0 or y1 <= y0:
        raise InvalidBox(f"{name}: box {box} has nonpositive area")


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    _check_box(a, "a")
    _check_box(b, "b")
    ix0 = max(a[0], b[0])
    iy0 = max(a[1], b[1])
    ix1 = min(a[2], b[2])
    iy1 = min(a[3], b[3])
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def corloc(preds: dict[str, Box], gts: dict[str, GroundTruth]) -> EvalReport:
    """Score one predicted box per ground-truth image.

    Every ground-truth image must have a prediction (MissingPrediction
    otherwise) and every prediction must refer to a known image
    (UnknownImageId otherwise).
    """
    if not gts:
        raise ValueError("ground truth is empty")
    unknown = sorted(set(preds) - set(gts))
    if unknown:
        raise UnknownImageId(f"predictions for unknown images: {unknown}")
    missing = sorted(set(gts) - set(preds))
    if missing:
        raise MissingPrediction(f"no prediction for images: {missing}")

    per_image = []
    num_correct = 0
    for image_id in sorted(gts):
        best = max(iou(preds[image_id], gt_box) for gt_box in gts[image_id].boxes)
        correct = best > CORLOC_IOU_THRESHOLD
        num_correct += int(correct)
        per_image.append(PerImageResult(image_id, best, correct))
    return EvalReport(
        corloc=num_correct / len(gts),
        num_images=len(gts),
        num_correct=num_correct,
        per_image=tuple(per_image))
