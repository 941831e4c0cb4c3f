"""Confusion tallies and the classification metrics built on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValidationError(f"{name} must be a nonnegative int, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def as_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def tally(pairs: Iterable[tuple[bool, object]]) -> ConfusionCounts:
    """Count (gold, predicted) pairs.

    A prediction that is neither ``True`` nor ``False`` (a parse miss, a failed call) is
    wrong whatever the gold label: a false negative on positives, a false positive on negatives.
    """
    tp = fp = fn = tn = 0
    for gold, pred in pairs:
        if pred is not True and pred is not False:
            pred = not gold
        if gold:
            tp, fn = (tp + 1, fn) if pred else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if pred else (fp, tn + 1)
    return ConfusionCounts(tp, fp, fn, tn)


def f1_defined(c: ConfusionCounts) -> bool:
    """False when there are no positives in gold or prediction, where F1 is 0/0."""
    return 2 * c.tp + c.fp + c.fn > 0


def f1_from_counts(c: ConfusionCounts) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / denom if denom else 0.0


def accuracy_from_counts(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValidationError("accuracy of an empty tally is undefined")
    return (c.tp + c.tn) / c.total


def precision_recall_f1(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    """P/R/F1 from a hit count and both denominators.

    Nothing predicted and nothing expected scores 1.0; exactly one empty side scores 0.
    """
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def macro(values: Sequence[float]) -> float:
    values = list(values)
    if not values:
        raise ValidationError("macro average of no values")
    return sum(values) / len(values)
