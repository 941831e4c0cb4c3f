"""Lab-report entry matching and per-field extraction scoring."""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from ..errors import ValidationError
from ..promptforge.types import LAB_FIELDS, LabTestEntry
from .counts import precision_recall_f1

DEFAULT_JACCARD = 0.8
NUMERIC_REL_TOL = 1e-9

_PAREN_RE = re.compile(r"\([^()]*\)")
_TRAILING_PUNCT = ".,;:!?-_/"


class MatchPhase(str, enum.Enum):
    EXACT_NAME_RESULT = "EXACT_NAME_RESULT"
    EXACT_NAME = "EXACT_NAME"
    FUZZY = "FUZZY"


def normalize_name(name: str) -> str:
    """Drop parenthesized parts, collapse whitespace, casefold, strip trailing punctuation."""
    prev = None
    s = str(name)
    while s != prev:
        prev = s
        s = _PAREN_RE.sub(" ", s)
    s = " ".join(s.split()).casefold()
    return s.rstrip(_TRAILING_PUNCT).strip()


def normalize_value(value: str) -> str:
    return " ".join(str(value).split()).casefold()


def _as_number(s: str) -> float | None:
    try:
        v = float(s.replace(",", "")) if s else None
    except ValueError:
        return None
    return v if v is not None and math.isfinite(v) else None


def values_equal(a: str, b: str, rel_tol: float = NUMERIC_REL_TOL) -> bool:
    """Normalized text equality; values that both parse as numbers compare by value."""
    na, nb = normalize_value(a), normalize_value(b)
    if na == nb:
        return True
    fa, fb = _as_number(na), _as_number(nb)
    if fa is None or fb is None:
        return False
    return math.isclose(fa, fb, rel_tol=rel_tol, abs_tol=0.0)


def name_jaccard(a: str, b: str) -> float:
    ta, tb = set(normalize_name(a).split()), set(normalize_name(b).split())
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


@dataclass(frozen=True)
class Matching:
    """One-to-one pairs ``(pred_index, gold_index, phase)`` plus the leftovers on each side."""

    pairs: tuple[tuple[int, int, MatchPhase], ...]
    unmatched_pred: tuple[int, ...]
    unmatched_gold: tuple[int, ...]

    def phase_of(self, pred_index: int) -> MatchPhase | None:
        for p, _, phase in self.pairs:
            if p == pred_index:
                return phase
        return None


def match_lab_entries(pred: Sequence[LabTestEntry], gold: Sequence[LabTestEntry],
                      jaccard_threshold: float = DEFAULT_JACCARD) -> Matching:
    """Pair predicted and gold entries in three phases, each consuming what it matches.

    1. equal normalized name and equal result
    2. equal normalized name
    3. name token-set Jaccard at or above ``jaccard_threshold``, greedy by similarity
       (ties by gold order, then prediction order)
    """
    pnames = [normalize_name(e.name) for e in pred]
    gnames = [normalize_name(e.name) for e in gold]
    free_p = set(range(len(pred)))
    free_g = set(range(len(gold)))
    pairs: list[tuple[int, int, MatchPhase]] = []

    def exact_phase(phase: MatchPhase, with_result: bool) -> None:
        for gi in range(len(gold)):
            if gi not in free_g:
                continue
            for pi in range(len(pred)):
                if pi not in free_p or pnames[pi] != gnames[gi]:
                    continue
                if with_result and not values_equal(pred[pi].result, gold[gi].result):
                    continue
                pairs.append((pi, gi, phase))
                free_p.discard(pi)
                free_g.discard(gi)
                break

    exact_phase(MatchPhase.EXACT_NAME_RESULT, True)
    exact_phase(MatchPhase.EXACT_NAME, False)

    candidates = []
    for gi in sorted(free_g):
        for pi in sorted(free_p):
            sim = name_jaccard(pred[pi].name, gold[gi].name)
            if sim >= jaccard_threshold:
                candidates.append((-sim, gi, pi))
    for _, gi, pi in sorted(candidates):
        if gi in free_g and pi in free_p:
            pairs.append((pi, gi, MatchPhase.FUZZY))
            free_p.discard(pi)
            free_g.discard(gi)

    return Matching(tuple(pairs), tuple(sorted(free_p)), tuple(sorted(free_g)))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class FieldCounts:
    """Raw tallies behind one precision/recall/F1 triple; pool these for micro averages."""

    tp: int = 0
    n_pred: int = 0
    n_gold: int = 0

    def __add__(self, other: "FieldCounts") -> "FieldCounts":
        return FieldCounts(self.tp + other.tp, self.n_pred + other.n_pred, self.n_gold + other.n_gold)

    def prf(self) -> PRF:
        return PRF(*precision_recall_f1(self.tp, self.n_pred, self.n_gold))


@dataclass(frozen=True)
class ExtractionScore:
    overall: PRF
    per_field: dict[str, PRF]
    counts: dict[str, FieldCounts] = field(default_factory=dict, compare=False)

    @property
    def macro_field_f1(self) -> float:
        return sum(v.f1 for v in self.per_field.values()) / len(self.per_field)


def extraction_counts(matching: Matching, pred: Sequence[LabTestEntry],
                      gold: Sequence[LabTestEntry]) -> dict[str, FieldCounts]:
    """Overall and per-field tallies. Key ``"overall"`` holds the entry-level counts."""
    if len(matching.pairs) + len(matching.unmatched_pred) != len(pred) or \
            len(matching.pairs) + len(matching.unmatched_gold) != len(gold):
        raise ValidationError("matching does not partition the entry lists")
    out = {"overall": FieldCounts(len(matching.pairs), len(pred), len(gold))}
    for f in LAB_FIELDS:
        tp = 0
        for pi, gi, _ in matching.pairs:
            pv, gv = getattr(pred[pi], f), getattr(gold[gi], f)
            if not (pv.strip() and gv.strip()):
                continue
            if normalize_name(pv) == normalize_name(gv) if f == "name" else values_equal(pv, gv):
                tp += 1
        n_pred = sum(bool(getattr(e, f).strip()) for e in pred)
        n_gold = sum(bool(getattr(e, f).strip()) for e in gold)
        out[f] = FieldCounts(tp, n_pred, n_gold)
    return out


def score_from_counts(counts: dict[str, FieldCounts]) -> ExtractionScore:
    return ExtractionScore(
        overall=counts["overall"].prf(),
        per_field={f: counts[f].prf() for f in LAB_FIELDS},
        counts=dict(counts),
    )


def score_extraction(matching: Matching, pred: Sequence[LabTestEntry],
                     gold: Sequence[LabTestEntry]) -> ExtractionScore:
    return score_from_counts(extraction_counts(matching, pred, gold))
