"""Class-balanced accuracy for longitudinal change labels."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable

from ..errors import ValidationError


def temporal_macro_accuracy(records: Iterable[tuple[str, object, object]]) -> float:
    """Accuracy per gold class within each pathology, averaged over the classes present,
    then averaged over pathologies. Any prediction not equal to gold counts as wrong."""
    tallies: dict[str, dict[object, list[int]]] = defaultdict(lambda: defaultdict(lambda: [0, 0]))
    for pathology, gold, pred in records:
        t = tallies[pathology][gold]
        t[0] += int(pred == gold)
        t[1] += 1
    if not tallies:
        raise ValidationError("temporal_macro_accuracy needs at least one record")
    per_pathology = []
    for pathology in sorted(tallies):
        classes = tallies[pathology].values()
        per_pathology.append(sum(c / n for c, n in classes) / len(classes))
    return sum(per_pathology) / len(per_pathology)
