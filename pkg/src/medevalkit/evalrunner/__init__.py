"""Evaluation driver: manifests, endpoints, runners and reports."""
from .endpoint import (
    API_KEY_ENV,
    MOCK_RESPONDERS,
    CallContext,
    EndpointConfig,
    HttpEndpoint,
    MockEndpoint,
    gold_reply,
    make_endpoint,
    request_body,
    wrong_reply,
)
from .manifest import (
    CT_CONDITIONS,
    CTRATE_CONDITIONS,
    DEFAULT_CONDITIONS,
    MR_CONDITIONS,
    SCHEMA_VERSION,
    ManifestRecord,
    TaskKind,
    load_manifest,
    record_from_json,
    write_manifest,
)
from .report import EvalReport, emit_report, load_report, report_bytes, verify_report
from .runner import (
    build_jobs,
    render_record,
    run_bbox_eval,
    run_condition_classification,
    run_evaluation,
    run_lab_eval,
    run_mcq_eval,
    run_temporal_eval,
    run_wsi_eval,
)
from .scoring import PRIMARY_METRIC, aggregate, aggregate_all, parse_reply, score_row

__all__ = [
    "API_KEY_ENV",
    "CTRATE_CONDITIONS",
    "CT_CONDITIONS",
    "DEFAULT_CONDITIONS",
    "MOCK_RESPONDERS",
    "MR_CONDITIONS",
    "PRIMARY_METRIC",
    "SCHEMA_VERSION",
    "CallContext",
    "EndpointConfig",
    "EvalReport",
    "HttpEndpoint",
    "ManifestRecord",
    "MockEndpoint",
    "TaskKind",
    "aggregate",
    "aggregate_all",
    "build_jobs",
    "emit_report",
    "gold_reply",
    "load_manifest",
    "load_report",
    "make_endpoint",
    "parse_reply",
    "record_from_json",
    "render_record",
    "report_bytes",
    "request_body",
    "run_bbox_eval",
    "run_condition_classification",
    "run_evaluation",
    "run_lab_eval",
    "run_mcq_eval",
    "run_temporal_eval",
    "run_wsi_eval",
    "score_row",
    "verify_report",
    "wrong_reply",
]
