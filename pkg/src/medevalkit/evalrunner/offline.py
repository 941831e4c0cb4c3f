"""Score prediction files against gold files without calling a model.

Both files are JSONL keyed by ``id``. A prediction carries either the raw model ``reply``
(parsed here) or an already-structured answer. Schemas per task:

===========  ===================================================  =======================================
task         gold fields                                          structured prediction field
===========  ===================================================  =======================================
bbox         object, box [y0, x0, y1, x1]                          boxes [{label, box}]
ct           condition, label (bool)                               answer (bool)
temporal     pathology, class (A/B/C or IMPROVED/STABLE/WORSENED)  class
wsi          reference                                             text
lab          entries [{name, result, ...}]                         entries
mcq          choice                                                choice
===========  ===================================================  =======================================
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

from .. import __version__
from ..errors import ValidationError
from ..medmetrics.extraction import DEFAULT_JACCARD
from ..promptforge import LabTestEntry
from .manifest import TaskKind, parse_temporal_label
from .report import EvalReport
from .scoring import aggregate, parse_reply, score_row

logger = logging.getLogger(__name__)

SCORE_TASKS = {
    "bbox": TaskKind.BBOX_LOC,
    "ct": TaskKind.CT_CLS,
    "temporal": TaskKind.TEMPORAL,
    "wsi": TaskKind.WSI_REPORT,
    "lab": TaskKind.LAB_EXTRACT,
    "mcq": TaskKind.TEXT_MCQ,
}
_STRUCTURED = {"bbox": "boxes", "ct": "answer", "temporal": "class", "wsi": "text", "lab": "entries",
               "mcq": "choice"}


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "id" not in obj:
                raise ValidationError(f"{path}:{lineno}: each line must be an object with an 'id'")
            out.append(obj)
    return out


def _row_key(task: str, obj: dict) -> str:
    return f"{obj['id']}/{obj['condition']}" if task == "ct" else str(obj["id"])


def _gold(task: str, g: dict) -> tuple[Any, str | None]:
    try:
        if task == "bbox":
            box = [float(v) for v in g["box"]]
            if len(box) != 4:
                raise ValueError("box needs four numbers")
            return {"label": g["object"], "box": box}, g["object"]
        if task == "ct":
            if not isinstance(g["label"], bool):
                raise ValueError("label must be true or false")
            return g["label"], g["condition"]
        if task == "temporal":
            return parse_temporal_label(g["class"]).value, g["pathology"]
        if task == "wsi":
            return str(g["reference"]), None
        if task == "lab":
            return [LabTestEntry(**e).as_dict() for e in g["entries"]], None
        return str(g["choice"]).upper(), None
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"gold record {g.get('id')!r}: {exc}") from None


def _structured(task: str, value: Any) -> Any:
    if task == "bbox":
        return [{"label": b["label"], "box": [float(v) for v in b["box"]]} for b in value]
    if task == "temporal":
        return parse_temporal_label(value).value
    if task == "lab":
        return [LabTestEntry(**e).as_dict() for e in value]
    if task == "mcq":
        return str(value).upper()
    return value


def score_files(task: str, pred_path: str | Path, gold_path: str | Path,
                jaccard_threshold: float = DEFAULT_JACCARD) -> EvalReport:
    if task not in SCORE_TASKS:
        raise ValidationError(f"unknown score task {task!r}; choose from {', '.join(SCORE_TASKS)}")
    kind = SCORE_TASKS[task]
    gold = read_jsonl(gold_path)
    if not gold:
        raise ValidationError(f"{gold_path}: no gold records")
    preds: dict[str, dict] = {}
    for p in read_jsonl(pred_path):
        if task == "ct" and "condition" not in p:
            raise ValidationError(f"prediction {p['id']!r} needs a condition")
        preds[_row_key(task, p)] = p

    rows, seen = [], set()
    for g in gold:
        key = _row_key(task, g)
        if key in seen:
            raise ValidationError(f"duplicate gold row {key!r}")
        seen.add(key)
        gold_val, condition = _gold(task, g)
        p = preds.get(key)
        reply = None
        if p is None:
            parsed, miss = None, "no prediction"
        elif "reply" in p:
            reply = str(p["reply"])
            parsed, miss = parse_reply(kind, reply)
        elif _STRUCTURED[task] in p:
            try:
                parsed, miss = _structured(task, p[_STRUCTURED[task]]), None
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"prediction {key!r}: {exc}") from None
        else:
            raise ValidationError(f"prediction {key!r} needs 'reply' or '{_STRUCTURED[task]}'")
        rows.append({
            "id": key, "example_id": str(g["id"]), "task_kind": kind.value, "condition": condition,
            "prompt_digest": None, "image_count": None, "raw_reply": reply, "parsed": parsed,
            "parse_miss": miss, "gold": gold_val, "score": score_row(kind, parsed, gold_val, jaccard_threshold), "error": None,
        })
    extra = sorted(set(preds) - seen)
    if extra:
        logger.warning("%d predictions have no gold row and were ignored (first: %s)", len(extra), extra[0])
    rows.sort(key=lambda r: r["id"])

    def digest(path):
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()

    metadata = {"mode": "score", "package_version": __version__, "score_task": task,
                "pred_digest": digest(pred_path), "gold_digest": digest(gold_path),
                "n_unmatched_predictions": len(extra), "scoring": {"jaccard_threshold": jaccard_threshold}}
    return EvalReport(metadata=metadata, per_example=rows, aggregates=[aggregate(kind, rows, jaccard_threshold)])
