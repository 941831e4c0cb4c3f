"""Token-level text overlap scores."""
from __future__ import annotations

import unicodedata
from collections import Counter

import numpy as np

from .. import _kernels


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, delete punctuation characters, split on whitespace."""
    kept = "".join(ch for ch in str(text).lower() if not unicodedata.category(ch).startswith("P"))
    return kept.split()


def tokenized_f1(pred: str, gold: str) -> float:
    p, g = normalize_tokens(pred), normalize_tokens(gold)
    if not p or not g:
        return float(not p and not g)
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(p), common / len(g)
    return 2 * precision * recall / (precision + recall)


def _ids(a: list[str], b: list[str]) -> tuple[np.ndarray, np.ndarray]:
    vocab: dict[str, int] = {}
    ia = np.array([vocab.setdefault(t, len(vocab)) for t in a], dtype=np.int64)
    ib = np.array([vocab.setdefault(t, len(vocab)) for t in b], dtype=np.int64)
    return ia, ib


def lcs_tokens(a: list[str], b: list[str]) -> int:
    return _kernels.lcs_length(*_ids(a, b))


def rouge_l(pred: str, ref: str) -> float:
    """ROUGE-L F1 (beta = 1) over normalized tokens."""
    p, r = normalize_tokens(pred), normalize_tokens(ref)
    if not p or not r:
        return float(not p and not r)
    lcs = lcs_tokens(p, r)
    if lcs == 0:
        return 0.0
    precision, recall = lcs / len(p), lcs / len(r)
    return 2 * precision * recall / (precision + recall)
