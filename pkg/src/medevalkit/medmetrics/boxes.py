"""Box overlap metrics."""
from __future__ import annotations

from typing import Sequence

from ..errors import ValidationError
from ..promptforge.types import BBox
from .text import tokenized_f1


def iou(a: BBox, b: BBox) -> float:
    ih = max(0.0, min(a.y1, b.y1) - max(a.y0, b.y0))
    iw = max(0.0, min(a.x1, b.x1) - max(a.x0, b.x0))
    inter = ih * iw
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, inter / union)


def select_box(prediction, query: str) -> BBox | None:
    """Pick the predicted box whose label best matches ``query``; ties keep the first."""
    if isinstance(prediction, BBox):
        return prediction
    if not prediction:
        return None
    best, best_score = None, -1.0
    for box in prediction:
        score = tokenized_f1(box.label, query)
        if score > best_score:
            best, best_score = box, score
    return best


def record_iou(prediction, gold: BBox, query: str | None = None) -> float:
    box = select_box(prediction, gold.label if query is None else query)
    return 0.0 if box is None else iou(box, gold)


def mean_iou(records: Sequence[tuple[object, BBox]]) -> float:
    """Mean IoU over ``(prediction, gold)`` records.

    A prediction may be a box, a list of boxes, ``None`` or a ``ParseMiss``; missing
    predictions score 0.
    """
    if not records:
        raise ValidationError("mean_iou needs at least one record")
    return sum(record_iou(pred, gold) for pred, gold in records) / len(records)
