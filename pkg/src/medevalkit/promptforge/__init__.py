"""Verbatim prompt templates, prompt rendering and reply parsing."""
from .parse import (
    canonical_text,
    entries_from_objects,
    find_first_array,
    normalize_collection_time,
    parse_bboxes,
    parse_choice,
    parse_final_answer,
    parse_lab_entries,
    parse_temporal,
    parse_yes_no,
)
from .templates import (
    MEDICAL_ASSISTANT,
    RADIOLOGY_ASSISTANT,
    THINK_SILENTLY,
    ImageSlot,
    ModelKind,
    PromptTemplate,
    get_template,
    load_templates,
    render_bbox_prompt,
    render_ehrnoteqa_prompt,
    render_lab_prompt,
    render_template,
    render_temporal_prompt,
    render_text,
    render_text_mcq_prompt,
    render_volume_prompt,
    render_wsi_prompt,
    resolve_system_text,
    template_digests,
    thinking_enabled,
)
from .types import (
    LAB_FIELDS,
    AnswerKind,
    BBox,
    ImageRef,
    LabTestEntry,
    ParsedAnswer,
    ParseMiss,
    Part,
    PartKind,
    RenderedPrompt,
    TemporalClass,
)

__all__ = [
    "LAB_FIELDS",
    "MEDICAL_ASSISTANT",
    "RADIOLOGY_ASSISTANT",
    "THINK_SILENTLY",
    "AnswerKind",
    "BBox",
    "ImageRef",
    "ImageSlot",
    "LabTestEntry",
    "ModelKind",
    "ParseMiss",
    "ParsedAnswer",
    "Part",
    "PartKind",
    "PromptTemplate",
    "RenderedPrompt",
    "TemporalClass",
    "canonical_text",
    "entries_from_objects",
    "find_first_array",
    "get_template",
    "load_templates",
    "normalize_collection_time",
    "parse_bboxes",
    "parse_choice",
    "parse_final_answer",
    "parse_lab_entries",
    "parse_temporal",
    "parse_yes_no",
    "render_bbox_prompt",
    "render_ehrnoteqa_prompt",
    "render_lab_prompt",
    "render_template",
    "render_temporal_prompt",
    "render_text",
    "render_text_mcq_prompt",
    "render_volume_prompt",
    "render_wsi_prompt",
    "resolve_system_text",
    "template_digests",
    "thinking_enabled",
]
