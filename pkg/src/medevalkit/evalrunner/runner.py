"""Render, call, parse and score: the evaluation driver."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .. import __version__
from ..errors import ValidationError
from ..medmetrics.extraction import DEFAULT_JACCARD
from ..promptforge import ImageRef, RenderedPrompt, get_template, resolve_system_text, template_digests
from ..promptforge.templates import (
    render_bbox_prompt,
    render_ehrnoteqa_prompt,
    render_lab_prompt,
    render_temporal_prompt,
    render_text_mcq_prompt,
    render_volume_prompt,
    render_wsi_prompt,
)
from .endpoint import CallContext, Endpoint, EndpointConfig
from .manifest import SCHEMA_VERSION, ManifestRecord, TaskKind, check_unique
from .report import EvalReport, redact_url
from .scoring import aggregate_all, gold_value, parse_reply, score_row

logger = logging.getLogger(__name__)

TEMPLATE_FOR = {
    TaskKind.CT_CLS: "ct_us1",
    TaskKind.MR_CLS: "mri_us1",
    TaskKind.CTRATE_CLS: "ct_rate",
    TaskKind.WSI_REPORT: "pathology_wsi",
    TaskKind.TEMPORAL: "ms_cxr_t",
    TaskKind.BBOX_LOC: "localization",
    TaskKind.LAB_EXTRACT: "document_understanding",
    TaskKind.TEXT_MCQ: "text_mcq",
    TaskKind.EHRNOTE_MCQ: "ehrnoteqa",
}
_SYSTEM_TASK_NAME = {TaskKind.BBOX_LOC: "localization", TaskKind.TEMPORAL: "MS-CXR-T"}


@dataclass(frozen=True)
class Job:
    row_id: str
    record: ManifestRecord
    condition: str | None
    prompt: RenderedPrompt


def render_record(record: ManifestRecord, condition: str | None, config: EndpointConfig) -> RenderedPrompt:
    k, inp = record.task_kind, record.inputs
    template = get_template(TEMPLATE_FOR[k])
    system = resolve_system_text(config.model_kind, _SYSTEM_TASK_NAME.get(k, k.value), template.thinking)
    kw = {"system_text": system, "temperature": config.temperature}
    if k.is_classification:
        images = [ImageRef(path=p) for p in record.image_paths()]
        indices = inp.get("slice_indices", list(range(len(images))))
        if len(indices) != len(images):
            raise ValidationError(f"{record.example_id}: slice_indices must match images")
        return render_volume_prompt(list(zip(indices, images)), inp.get("history", ""), condition,
                                    template_id=template.template_id, **kw)
    if k is TaskKind.WSI_REPORT:
        images = [ImageRef(path=p) for p in record.image_paths()]
        return render_wsi_prompt(images, inp["type_procedure"], inp.get("question", ""), **kw)
    if k is TaskKind.TEMPORAL:
        prior, current = (ImageRef(path=p) for p in record.image_paths())
        return render_temporal_prompt(prior, current, inp["pathology"], **kw)
    if k is TaskKind.BBOX_LOC:
        return render_bbox_prompt(ImageRef(path=record.resolve(inp["image"])), inp["object"], **kw)
    if k is TaskKind.LAB_EXTRACT:
        return render_lab_prompt([ImageRef(path=p) for p in record.image_paths()], **kw)
    if k is TaskKind.EHRNOTE_MCQ:
        return render_ehrnoteqa_prompt(inp["discharge_note"], inp["question"], inp["choices"], **kw)
    return render_text_mcq_prompt(inp["question"], **kw)


def build_jobs(records: Sequence[ManifestRecord], config: EndpointConfig) -> list[Job]:
    """One job per (record, condition) for classification tasks, one per record otherwise."""
    jobs = []
    for rec in sorted(records, key=lambda r: r.example_id):
        if rec.task_kind.is_classification:
            for cond in rec.conditions:
                jobs.append(Job(f"{rec.example_id}/{cond}", rec, cond, render_record(rec, cond, config)))
        else:
            cond = rec.inputs.get("pathology") if rec.task_kind is TaskKind.TEMPORAL else \
                rec.inputs.get("object") if rec.task_kind is TaskKind.BBOX_LOC else None
            jobs.append(Job(rec.example_id, rec, cond, render_record(rec, None, config)))
    ids = [j.row_id for j in jobs]
    if len(set(ids)) != len(ids):
        raise ValidationError("row ids collide; check example_id and condition names")
    return jobs


def _call(endpoint: Endpoint, job: Job) -> tuple[str | None, str | None]:
    try:
        return endpoint.generate(job.prompt, CallContext(job.record, job.condition)), None
    except Exception as exc:  # recorded on the row; the run continues
        logger.error("%s: %s: %s", job.row_id, type(exc).__name__, exc)
        return None, f"{type(exc).__name__}: {exc}"


def execute(jobs: Sequence[Job], endpoint: Endpoint, max_in_flight: int) -> list[tuple[str | None, str | None]]:
    """Run every job with at most ``max_in_flight`` outstanding calls; results keep job order."""
    if max_in_flight < 1:
        raise ValidationError("max_in_flight must be >= 1")
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda j: _call(endpoint, j), jobs))


def make_row(job: Job, reply: str | None, error: str | None,
             jaccard_threshold: float = DEFAULT_JACCARD) -> dict[str, Any]:
    k = job.record.task_kind
    gold = gold_value(job.record, job.condition)
    if reply is None:
        parsed, miss = None, "no reply"
    else:
        parsed, miss = parse_reply(k, reply, job.record.inputs.get("letters", "ABCDE"))
    return {
        "id": job.row_id,
        "example_id": job.record.example_id,
        "task_kind": k.value,
        "condition": job.condition,
        "prompt_digest": job.prompt.digest(),
        "image_count": job.prompt.image_count,
        "raw_reply": reply,
        "parsed": parsed,
        "parse_miss": miss,
        "gold": gold,
        "score": score_row(k, parsed, gold, jaccard_threshold),
        "error": error,
    }


def _digest(obj: Any) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, ensure_ascii=False).encode()).hexdigest()


def run_evaluation(records: Iterable[ManifestRecord], endpoint: Endpoint, config: EndpointConfig,
                   tasks: Iterable[TaskKind | str] | None = None,
                   global_config: dict | None = None,
                   jaccard_threshold: float = DEFAULT_JACCARD) -> EvalReport:
    """Evaluate every record (optionally only the given task kinds) and build the report."""
    records = list(records)
    if tasks is not None:
        wanted = {TaskKind(t) for t in tasks}
        records = [r for r in records if r.task_kind in wanted]
    if not records:
        raise ValidationError("nothing to evaluate: the manifest has no matching records")
    check_unique(records)
    jobs = build_jobs(records, config)
    logger.info("running %d calls over %d records", len(jobs), len(records))
    results = execute(jobs, endpoint, config.max_in_flight)
    rows = sorted((make_row(j, reply, err, jaccard_threshold) for j, (reply, err) in zip(jobs, results)),
                  key=lambda r: r["id"])

    endpoint_meta = {**config.as_metadata(), "base_url": redact_url(config.base_url)}
    global_config = dict(global_config or {})
    metadata = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "tasks": sorted({r.task_kind.value for r in records}),
        "endpoint": endpoint_meta,
        "config_digest": _digest({"endpoint": endpoint_meta, "global": global_config}),
        "global_config": global_config,
        "manifest_digest": _digest(sorted((r.to_json() for r in records), key=lambda o: o["example_id"])),
        "template_digests": template_digests(),
        "seed": config.seed,
        "retry_policy": {"retries": config.retries, "backoff": "exponential",
                         "base_delay_s": config.backoff_s, "timeout_s": config.timeout_s},
        "n_records": len(records),
        "scoring": {"jaccard_threshold": jaccard_threshold},
    }
    return EvalReport(metadata=metadata, per_example=rows, aggregates=aggregate_all(rows, jaccard_threshold))


def _run_kind(kinds: set[TaskKind], records, endpoint, config, **kw) -> EvalReport:
    records = list(records)
    bad = sorted({r.task_kind.value for r in records} - {k.value for k in kinds})
    if bad:
        raise ValidationError(f"unexpected task kinds for this runner: {', '.join(bad)}")
    return run_evaluation(records, endpoint, config, **kw)


def run_condition_classification(records, endpoint, config, task_kind: TaskKind | str, **kw) -> EvalReport:
    kind = TaskKind(task_kind)
    if not kind.is_classification:
        raise ValidationError(f"{kind.value} is not a condition classification task")
    return _run_kind({kind}, records, endpoint, config, **kw)


def run_bbox_eval(records, endpoint, config, **kw) -> EvalReport:
    return _run_kind({TaskKind.BBOX_LOC}, records, endpoint, config, **kw)


def run_temporal_eval(records, endpoint, config, **kw) -> EvalReport:
    return _run_kind({TaskKind.TEMPORAL}, records, endpoint, config, **kw)


def run_wsi_eval(records, endpoint, config, **kw) -> EvalReport:
    return _run_kind({TaskKind.WSI_REPORT}, records, endpoint, config, **kw)


def run_lab_eval(records, endpoint, config, **kw) -> EvalReport:
    return _run_kind({TaskKind.LAB_EXTRACT}, records, endpoint, config, **kw)


def run_mcq_eval(records, endpoint, config, **kw) -> EvalReport:
    return _run_kind({TaskKind.TEXT_MCQ, TaskKind.EHRNOTE_MCQ}, records, endpoint, config, **kw)
