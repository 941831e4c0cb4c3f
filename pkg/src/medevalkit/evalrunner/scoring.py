"""Reply parsing, per-example scores and task aggregates.

Rows are plain JSON-ready dicts so that a written report can be re-scored without the
endpoint: every aggregate is a function of the rows' ``parsed`` and ``gold`` values.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Any, Iterable

from ..medmetrics import (
    accuracy_from_counts,
    extraction_counts,
    f1_defined,
    f1_from_counts,
    macro,
    match_lab_entries,
    record_iou,
    rouge_l,
    score_from_counts,
    tally,
    temporal_macro_accuracy,
)
from ..medmetrics.extraction import DEFAULT_JACCARD, FieldCounts
from ..promptforge import (
    BBox,
    LabTestEntry,
    ParseMiss,
    TemporalClass,
    parse_bboxes,
    parse_choice,
    parse_lab_entries,
    parse_temporal,
    parse_yes_no,
)
from .manifest import ManifestRecord, TaskKind, parse_temporal_label

PRIMARY_METRIC = {
    TaskKind.CT_CLS: "macro_accuracy",
    TaskKind.MR_CLS: "macro_accuracy",
    TaskKind.CTRATE_CLS: "macro_f1",
    TaskKind.WSI_REPORT: "mean_rouge_l",
    TaskKind.TEMPORAL: "macro_accuracy",
    TaskKind.BBOX_LOC: "mean_iou",
    TaskKind.LAB_EXTRACT: "f1",
    TaskKind.TEXT_MCQ: "accuracy",
    TaskKind.EHRNOTE_MCQ: "accuracy",
}


def gold_value(record: ManifestRecord, condition: str | None) -> Any:
    """The JSON gold value stored on a row."""
    k = record.task_kind
    if k.is_classification:
        return record.gold["labels"][condition]
    if k is TaskKind.BBOX_LOC:
        return {"label": record.inputs["object"], "box": [float(v) for v in record.gold["box"]]}
    if k is TaskKind.TEMPORAL:
        return parse_temporal_label(record.gold["class"]).value
    if k is TaskKind.WSI_REPORT:
        return record.gold["reference"]
    if k is TaskKind.LAB_EXTRACT:
        return [LabTestEntry(**e).as_dict() for e in record.gold["entries"]]
    return record.gold["choice"].upper()


def parse_reply(kind: TaskKind, reply: str, letters: str = "ABCDE") -> tuple[Any, str | None]:
    """Parse a raw reply into its JSON row value. Returns ``(parsed, miss_reason)``."""
    if kind.is_classification:
        out = parse_yes_no(reply)
    elif kind is TaskKind.BBOX_LOC:
        out = parse_bboxes(reply)
        if not isinstance(out, ParseMiss):
            out = [{"label": b.label, "box": b.as_list()} for b in out]
    elif kind is TaskKind.TEMPORAL:
        out = parse_temporal(reply)
        if not isinstance(out, ParseMiss):
            out = out.value
    elif kind is TaskKind.WSI_REPORT:
        out = reply.strip() or ParseMiss("empty reply")
    elif kind is TaskKind.LAB_EXTRACT:
        out = parse_lab_entries(reply)
        if not isinstance(out, ParseMiss):
            out = [e.as_dict() for e in out]
    else:
        out = parse_choice(reply, letters)
    if isinstance(out, ParseMiss):
        return None, out.reason
    return out, None


def _boxes(parsed) -> list[BBox] | None:
    if parsed is None:
        return None
    return [BBox(*b["box"], label=b["label"]) for b in parsed]


def _entries(values) -> list[LabTestEntry]:
    return [LabTestEntry(**e) for e in values or []]


def _lab_counts(parsed, gold, jaccard_threshold: float) -> dict[str, FieldCounts]:
    pred, ref = _entries(parsed), _entries(gold)
    return extraction_counts(match_lab_entries(pred, ref, jaccard_threshold), pred, ref)


def score_row(kind: TaskKind, parsed: Any, gold: Any, jaccard_threshold: float = DEFAULT_JACCARD) -> float:
    """Per-example score; a missing ``parsed`` value is a wrong answer."""
    if kind is TaskKind.BBOX_LOC:
        return record_iou(_boxes(parsed), BBox(*gold["box"], label=gold["label"]))
    if kind is TaskKind.WSI_REPORT:
        return rouge_l(parsed, gold) if parsed is not None else 0.0
    if kind is TaskKind.LAB_EXTRACT:
        return score_from_counts(_lab_counts(parsed, gold, jaccard_threshold)).overall.f1
    return float(parsed is not None and parsed == gold)


def _round(x: float) -> float:
    # a fixed number of digits keeps the written report independent of summation order noise
    return round(float(x), 12)


def aggregate(kind: TaskKind, rows: list[dict], jaccard_threshold: float = DEFAULT_JACCARD) -> dict:
    """Aggregate block for one task from its rows (sorted by id)."""
    rows = sorted(rows, key=lambda r: r["id"])
    block: dict[str, Any] = {
        "task": kind.value,
        "metric": PRIMARY_METRIC[kind],
        "n_examples": len({r["example_id"] for r in rows}),
        "n_calls": len(rows),
        "n_parse_miss": sum(r["parse_miss"] is not None and r["error"] is None for r in rows),
        "n_errors": sum(r["error"] is not None for r in rows),
    }
    per: dict[str, dict] = {}
    if kind.is_classification:
        by_cond = defaultdict(list)
        for r in rows:
            by_cond[r["condition"]].append((r["gold"], r["parsed"]))
        for cond in sorted(by_cond):
            c = tally(by_cond[cond])
            per[cond] = {**c.as_dict(), "accuracy": _round(accuracy_from_counts(c)),
                         "f1": _round(f1_from_counts(c)), "f1_defined": f1_defined(c)}
        block["macro_accuracy"] = _round(macro([v["accuracy"] for v in per.values()]))
        # conditions with no positives on either side have no F1 and are left out of the mean
        defined = [v["f1"] for v in per.values() if v["f1_defined"]]
        block["macro_f1"] = _round(macro(defined)) if defined else 0.0
        block["n_f1_conditions"] = len(defined)
    elif kind is TaskKind.TEMPORAL:
        recs = [(r["condition"], r["gold"], r["parsed"]) for r in rows]
        for cond in sorted({r[0] for r in recs}):
            per[cond] = {"macro_accuracy": _round(temporal_macro_accuracy([x for x in recs if x[0] == cond]))}
        block["macro_accuracy"] = _round(temporal_macro_accuracy(recs))
    elif kind is TaskKind.LAB_EXTRACT:
        pooled: dict[str, FieldCounts] = defaultdict(FieldCounts)
        for r in rows:
            for key, c in _lab_counts(r["parsed"], r["gold"], jaccard_threshold).items():
                pooled[key] = pooled[key] + c
        score = score_from_counts(dict(pooled))
        for f, prf in score.per_field.items():
            c = pooled[f]
            per[f] = {"tp": c.tp, "n_pred": c.n_pred, "n_gold": c.n_gold,
                      **{k: _round(v) for k, v in prf.as_dict().items()}}
        o = pooled["overall"]
        block.update({"tp": o.tp, "n_pred": o.n_pred, "n_gold": o.n_gold,
                      **{k: _round(v) for k, v in score.overall.as_dict().items()},
                      "macro_field_f1": _round(score.macro_field_f1),
                      "mean_example_f1": _round(macro([r["score"] for r in rows]))})
    else:
        by_cond = defaultdict(list)
        for r in rows:
            if r["condition"] is not None:
                by_cond[r["condition"]].append(r["score"])
        per = {c: {"mean_score": _round(macro(v)), "n": len(v)} for c, v in sorted(by_cond.items())}
        block[PRIMARY_METRIC[kind]] = _round(macro([r["score"] for r in rows]))
    block["value"] = block[PRIMARY_METRIC[kind]]
    block["per_condition"] = per
    return block


def aggregate_all(rows: Iterable[dict], jaccard_threshold: float = DEFAULT_JACCARD) -> list[dict]:
    by_task = defaultdict(list)
    for r in rows:
        by_task[TaskKind(r["task_kind"])].append(r)
    return [aggregate(k, by_task[k], jaccard_threshold) for k in sorted(by_task, key=lambda k: k.value)]
