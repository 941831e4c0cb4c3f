"""Prompt template registry, integrity check and renderers."""
from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from ..errors import TemplateIntegrityError, ValidationError
from .types import ImageRef, Part, RenderedPrompt

SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

THINK_SILENTLY = "SYSTEM INSTRUCTION: think silently if needed."
RADIOLOGY_ASSISTANT = "You are a helpful radiology assistant."
MEDICAL_ASSISTANT = "You are a helpful medical assistant."

TYPO_FIXES = {"responce": "response"}


class ImageSlot(str, enum.Enum):
    NONE = "none"
    SINGLE = "image"
    MULTI = "images"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    image_slot: ImageSlot
    thinking: bool = False
    # "verbatim" templates reproduce evaluated prompts byte for byte; "authored" ones fill gaps
    source: str = "verbatim"

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(SLOT_RE.findall(self.body)))


# template_id -> (image slot, thinking on for MedGemma, source)
_REGISTRY = {
    "text_mcq": (ImageSlot.NONE, True, "verbatim"),
    "binarized_mcq": (ImageSlot.SINGLE, False, "verbatim"),
    "slakevqa": (ImageSlot.SINGLE, False, "verbatim"),
    "vqa_rad": (ImageSlot.SINGLE, False, "verbatim"),
    "pathology_wsi": (ImageSlot.MULTI, False, "verbatim"),
    "dermmcqa": (ImageSlot.SINGLE, False, "verbatim"),
    "eyepacs": (ImageSlot.SINGLE, False, "verbatim"),
    "ehrnoteqa": (ImageSlot.NONE, True, "verbatim"),
    "document_understanding": (ImageSlot.MULTI, False, "verbatim"),
    "localization": (ImageSlot.SINGLE, False, "verbatim"),
    "ct_us1": (ImageSlot.MULTI, False, "verbatim"),
    "mri_us1": (ImageSlot.MULTI, False, "verbatim"),
    "ct_rate": (ImageSlot.MULTI, False, "verbatim"),
    "ms_cxr_t": (ImageSlot.MULTI, False, "authored"),
}


def _template_dir():
    return resources.files(__package__).joinpath("templates")


def read_digests() -> dict[str, str]:
    text = _template_dir().joinpath("DIGESTS.sha256").read_text(encoding="utf-8")
    digests = {}
    for line in text.splitlines():
        if line.strip():
            digest, name = line.split(None, 1)
            digests[name.strip()] = digest
    return digests


@lru_cache(maxsize=1)
def load_templates() -> dict[str, PromptTemplate]:
    """Load every registered template, refusing any whose bytes do not match DIGESTS."""
    digests = read_digests()
    out = {}
    for tid, (slot, thinking, source) in _REGISTRY.items():
        name = f"{tid}.txt"
        data = _template_dir().joinpath(name).read_bytes()
        actual = hashlib.sha256(data).hexdigest()
        if digests.get(name) != actual:
            raise TemplateIntegrityError(
                f"template {name} digest {actual[:12]} does not match recorded "
                f"{(digests.get(name) or 'none')[:12]}"
            )
        out[tid] = PromptTemplate(tid, data.decode("utf-8"), slot, thinking, source)
    return out


def template_digests() -> dict[str, str]:
    load_templates()
    return dict(sorted(read_digests().items()))


def get_template(template_id: str) -> PromptTemplate:
    templates = load_templates()
    if template_id not in templates:
        raise ValidationError(f"unknown template {template_id!r}; known: {', '.join(sorted(templates))}")
    return templates[template_id]


def render_text(template: PromptTemplate, slots: Mapping[str, object], fix_typos: bool = False) -> str:
    missing = [s for s in template.slots if s not in slots]
    if missing:
        raise ValidationError(f"template {template.template_id} has unbound slots: {', '.join(missing)}")
    body = template.body
    if fix_typos:
        for wrong, right in TYPO_FIXES.items():
            body = body.replace(wrong, right)
    return SLOT_RE.sub(lambda m: str(slots[m.group(1)]) if m.group(1) in slots else m.group(0), body)


def _as_ref(image) -> ImageRef:
    if isinstance(image, ImageRef):
        return image
    if isinstance(image, (bytes, bytearray)):
        return ImageRef(data=bytes(image))
    if hasattr(image, "shape"):
        return ImageRef.from_array(image)
    return ImageRef(path=str(image))


def render_template(template_id: str, images: Sequence = (), *, fix_typos: bool = False,
                    system_text: str | None = None, temperature: float = 0.0,
                    image_labels: Sequence[str] | None = None, **slots) -> RenderedPrompt:
    """Render any registered template: image parts first, then the filled text.

    ``image_labels`` interleaves a text part before each image (``SLICE {i}``).
    """
    tpl = get_template(template_id)
    refs = [_as_ref(im) for im in images]
    if tpl.image_slot is ImageSlot.NONE and refs:
        raise ValidationError(f"template {template_id} takes no images")
    if tpl.image_slot is ImageSlot.SINGLE and len(refs) != 1:
        raise ValidationError(f"template {template_id} takes exactly one image, got {len(refs)}")
    if tpl.image_slot is ImageSlot.MULTI and not refs:
        raise ValidationError(f"template {template_id} needs at least one image")
    if image_labels is not None and len(image_labels) != len(refs):
        raise ValidationError("image_labels must match the number of images")

    parts: list[Part] = []
    for i, ref in enumerate(refs):
        if image_labels is not None:
            parts.append(Part.of_text(image_labels[i]))
        parts.append(Part.of_image(ref))
    parts.append(Part.of_text(render_text(tpl, slots, fix_typos)))
    return RenderedPrompt(parts, system_text=system_text, temperature=temperature, template_id=template_id)


def _volume_images(seq) -> tuple[list[int], list]:
    entries = getattr(seq, "entries", None)
    if entries is not None:
        return [e.global_index for e in entries], [e.image for e in entries]
    pairs = list(seq)
    return [int(i) for i, _ in pairs], [im for _, im in pairs]


def render_volume_prompt(seq, history: str, condition_label: str, modality: str = "CT",
                         template_id: str | None = None, **kw) -> RenderedPrompt:
    """Interleave ``SLICE {index}`` markers with slices, then the binary question.

    ``seq`` is a ``SliceSequence`` or an iterable of ``(global_index, image)``.
    """
    indices, images = _volume_images(seq)
    if not images:
        raise ValidationError("volume prompt needs at least one slice")
    modality = str(getattr(modality, "value", modality)).upper()
    if template_id is None:
        template_id = "mri_us1" if modality == "MR" else "ct_us1"
    if template_id != "ct_rate" and not history:
        raise ValidationError(f"template {template_id} requires a patient history")
    slots = {"label": condition_label}
    if "history" in get_template(template_id).slots:
        slots["history"] = history
    return render_template(template_id, images, image_labels=[f"SLICE {i}" for i in indices],
                           **slots, **kw)


def render_wsi_prompt(patches, type_procedure: str, question: str = "", **kw) -> RenderedPrompt:
    """All patch images, then the pathology instruction with the specimen label."""
    if hasattr(patches, "patches"):
        images = [p.png_bytes for p in patches.patches]
    else:
        images = list(patches)
    if not images:
        raise ValidationError("WSI prompt needs at least one patch")
    return render_template("pathology_wsi", images, type_procedure=type_procedure,
                           question=question, **kw)


def render_bbox_prompt(image, object_name: str, **kw) -> RenderedPrompt:
    return render_template("localization", [image], object=object_name, **kw)


def render_temporal_prompt(prior, current, pathology: str, **kw) -> RenderedPrompt:
    return render_template("ms_cxr_t", [prior, current], label=pathology, **kw)


def render_lab_prompt(pages: Iterable, **kw) -> RenderedPrompt:
    return render_template("document_understanding", list(pages), **kw)


def render_text_mcq_prompt(question: str, **kw) -> RenderedPrompt:
    return render_template("text_mcq", question=question, **kw)


def render_ehrnoteqa_prompt(discharge_note: str, question: str, choices: Mapping[str, str],
                            **kw) -> RenderedPrompt:
    letters = "ABCDE"
    missing = [c for c in letters if c not in choices]
    if missing:
        raise ValidationError(f"EHRNoteQA needs five choices, missing {', '.join(missing)}")
    slots = {f"choice_{c}": choices[c] for c in letters}
    return render_template("ehrnoteqa", discharge_note=discharge_note, orig_question=question,
                           **slots, **kw)


class ModelKind(str, enum.Enum):
    MEDGEMMA = "MEDGEMMA"
    GENERAL = "GENERAL"


def _task_key(task: str) -> str:
    return re.sub(r"[^a-z0-9]", "", str(getattr(task, "value", task)).lower())


RADIOLOGY_TASKS = frozenset(
    _task_key(t) for t in (
        "MS-CXR-T", "MS CXRT", "temporal", "SlakeVQA", "VQA-Rad", "Chest ImaGenome",
        "Chest ImaGenome (Localization)", "localization", "bbox", "BBOX_LOC",
    )
)
THINKING_TASKS = frozenset(
    _task_key(t) for t in (
        "MedQA", "MedMCQA", "EHRNoteQA", "EHRNOTE_MCQ", "PubMedQA", "MMLU Med", "MMLU",
        "MedXpertQA", "MedXpertQA (Text Only)", "AfriMed-QA", "AfriMed",
    )
)


def thinking_enabled(task_kind: str) -> bool:
    return _task_key(task_kind) in THINKING_TASKS


def resolve_system_text(model_kind: ModelKind | str, task_kind: str, thinking: bool = False) -> str | None:
    """MedGemma gets no system text unless thinking is on; general models get a role line."""
    if ModelKind(model_kind) is ModelKind.MEDGEMMA:
        return THINK_SILENTLY if thinking else None
    return RADIOLOGY_ASSISTANT if _task_key(task_kind) in RADIOLOGY_TASKS else MEDICAL_ASSISTANT
