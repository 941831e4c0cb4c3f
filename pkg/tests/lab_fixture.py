"""Hand-built lab report with hand-derived matching and per-field tallies."""
import json
from fractions import Fraction
from pathlib import Path

from medevalkit.medmetrics import MatchPhase
from medevalkit.promptforge import LabTestEntry

_DOC = json.loads((Path(__file__).parent / "fixtures" / "lab_report.json").read_text())
GOLD = [LabTestEntry(**e) for e in _DOC["gold"]]
PRED = [LabTestEntry(**e) for e in _DOC["pred"]]

P1, P2, P3 = MatchPhase.EXACT_NAME_RESULT, MatchPhase.EXACT_NAME, MatchPhase.FUZZY

# (pred, gold, phase). Sodium 140.0 == 140 and "potassium." == "Potassium" are exact after
# normalization; Hb and ALT differ only in result; the glucose names share 4 of 5 tokens
# (Jaccard exactly 0.8) and the bilirubin names are reordered (Jaccard 1.0).
EXPECTED_PAIRS = {(0, 3, P1), (2, 1, P1), (3, 2, P1), (4, 4, P1),
                  (1, 0, P2), (7, 7, P2),
                  (8, 8, P3), (5, 5, P3)}
EXPECTED_UNMATCHED_PRED = (6, 9)   # creatinine clearance (Jaccard 1/2), magnesium
EXPECTED_UNMATCHED_GOLD = (6, 9)   # creatinine, vitamin D

# field -> (tp, pred entries with the field filled, gold entries with the field filled)
EXPECTED_COUNTS = {
    "overall": (8, 10, 10),
    "name": (6, 10, 10),
    "result": (6, 10, 10),
    "unit": (8, 10, 10),
    "range": (8, 10, 10),
    "panel": (7, 9, 9),
    "method": (2, 2, 4),
    "specimen": (6, 9, 10),
    "sample_collection_time": (6, 7, 7),
}


def expected_prf(key):
    tp, n_pred, n_gold = EXPECTED_COUNTS[key]
    p, r = Fraction(tp, n_pred), Fraction(tp, n_gold)
    return p, r, 2 * p * r / (p + r)
