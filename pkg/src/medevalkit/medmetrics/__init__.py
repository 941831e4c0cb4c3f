"""Scoring functions: box overlap, classification tallies, text overlap, extraction matching."""
from .boxes import iou, mean_iou, record_iou, select_box
from .counts import (
    ConfusionCounts,
    accuracy_from_counts,
    f1_defined,
    f1_from_counts,
    macro,
    precision_recall_f1,
    tally,
)
from .extraction import (
    DEFAULT_JACCARD,
    ExtractionScore,
    FieldCounts,
    Matching,
    MatchPhase,
    PRF,
    extraction_counts,
    match_lab_entries,
    name_jaccard,
    normalize_name,
    normalize_value,
    score_extraction,
    score_from_counts,
    values_equal,
)
from .temporal import temporal_macro_accuracy
from .text import lcs_tokens, normalize_tokens, rouge_l, tokenized_f1

__all__ = [
    "DEFAULT_JACCARD",
    "PRF",
    "ConfusionCounts",
    "ExtractionScore",
    "FieldCounts",
    "MatchPhase",
    "Matching",
    "accuracy_from_counts",
    "extraction_counts",
    "f1_defined",
    "f1_from_counts",
    "iou",
    "lcs_tokens",
    "macro",
    "match_lab_entries",
    "mean_iou",
    "name_jaccard",
    "normalize_name",
    "normalize_tokens",
    "normalize_value",
    "precision_recall_f1",
    "record_iou",
    "rouge_l",
    "score_extraction",
    "score_from_counts",
    "select_box",
    "tally",
    "temporal_macro_accuracy",
    "tokenized_f1",
    "values_equal",
]
