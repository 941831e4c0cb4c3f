"""Report files, and re-verification of aggregates from per-example rows."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any
from urllib.parse import urlsplit, urlunsplit

from ..errors import ValidationError
from ..medmetrics.extraction import DEFAULT_JACCARD
from .manifest import TaskKind
from .scoring import aggregate_all, score_row

REPORT_NAME = "report.json"
SUMMARY_NAME = "summary.csv"
RUN_INFO_NAME = "run_info.json"


def redact_url(url: str) -> str:
    """Drop user info and query strings, which may carry credentials."""
    parts = urlsplit(url)
    if not parts.scheme.startswith("http"):
        return url
    host = parts.hostname or ""
    if parts.port:
        host = f"{host}:{parts.port}"
    return urlunsplit((parts.scheme, host, parts.path, "", ""))


@dataclass
class EvalReport:
    metadata: dict[str, Any]
    per_example: list[dict[str, Any]]
    aggregates: list[dict[str, Any]]
    timing: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"metadata": self.metadata, "per_example": self.per_example, "aggregates": self.aggregates}

    def aggregate_for(self, task: TaskKind | str) -> dict[str, Any]:
        name = TaskKind(task).value
        for block in self.aggregates:
            if block["task"] == name:
                return block
        raise KeyError(name)


def report_bytes(report: EvalReport) -> bytes:
    return (json.dumps(report.to_json(), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def summary_rows(report: EvalReport) -> list[list[str]]:
    rows = [["task", "condition", "metric", "value", "n"]]
    for block in report.aggregates:
        rows.append([block["task"], "ALL", block["metric"], f"{block['value']:.6f}", str(block["n_calls"])])
        for cond, vals in block["per_condition"].items():
            for metric in ("accuracy", "f1", "macro_accuracy", "mean_score"):
                if metric in vals:
                    n = vals.get("n", vals.get("tp", 0) + vals.get("fp", 0) + vals.get("fn", 0) + vals.get("tn", 0))
                    rows.append([block["task"], cond, metric, f"{vals[metric]:.6f}", str(n)])
    return rows


def emit_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json (byte-stable), summary.csv, and run_info.json (wall-clock data)."""
    if not report.per_example:
        raise ValidationError("refusing to write an empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / REPORT_NAME, "summary": out / SUMMARY_NAME, "run_info": out / RUN_INFO_NAME}
    paths["report"].write_bytes(report_bytes(report))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(summary_rows(report))
    paths["summary"].write_text(buf.getvalue(), encoding="utf-8")
    info = {"written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"), **report.timing}
    paths["run_info"].write_text(json.dumps(info, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return paths


def load_report(path: str | Path) -> EvalReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    if not path.is_file():
        raise ValidationError(f"report not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        return EvalReport(obj["metadata"], obj["per_example"], obj["aggregates"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path} is not a report: {exc}") from None


def _compare(path: str, expected: Any, actual: Any, out: list[str]) -> None:
    if isinstance(expected, dict) and isinstance(actual, dict):
        for key in sorted(set(expected) | set(actual)):
            if key not in expected or key not in actual:
                out.append(f"{path}.{key}: present on one side only")
            else:
                _compare(f"{path}.{key}", expected[key], actual[key], out)
    elif isinstance(expected, (int, float)) and isinstance(actual, (int, float)) \
            and not isinstance(expected, bool) and not isinstance(actual, bool):
        if not math.isclose(expected, actual, rel_tol=1e-9, abs_tol=1e-12):
            out.append(f"{path}: reported {actual!r}, recomputed {expected!r}")
    elif expected != actual:
        out.append(f"{path}: reported {actual!r}, recomputed {expected!r}")


def verify_report(report: EvalReport) -> list[str]:
    """Recompute row scores and aggregates; return one message per mismatch."""
    problems: list[str] = []
    ids = [r["id"] for r in report.per_example]
    if ids != sorted(ids):
        problems.append("per_example rows are not sorted by id")
    if len(set(ids)) != len(ids):
        problems.append("per_example ids are not unique")
    jaccard = report.metadata.get("scoring", {}).get("jaccard_threshold", DEFAULT_JACCARD)
    try:
        for r in report.per_example:
            expected = score_row(TaskKind(r["task_kind"]), r["parsed"], r["gold"], jaccard)
            _compare(f"per_example[{r['id']}].score", expected, r["score"], problems)
        recomputed = {b["task"]: b for b in aggregate_all(report.per_example, jaccard)}
    except (KeyError, TypeError, ValueError) as exc:
        return problems + [f"rows cannot be re-scored: {exc}"]
    reported = {b["task"]: b for b in report.aggregates}
    for task in sorted(set(recomputed) | set(reported)):
        if task not in reported or task not in recomputed:
            problems.append(f"aggregates[{task}]: present on one side only")
            continue
        _compare(f"aggregates[{task}]", recomputed[task], reported[task], problems)
    return problems
