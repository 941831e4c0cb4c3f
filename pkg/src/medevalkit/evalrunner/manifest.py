"""Line-delimited evaluation manifests."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from ..errors import ValidationError
from ..promptforge.types import LAB_FIELDS, TemporalClass

SCHEMA_VERSION = 1

CT_CONDITIONS = (
    "cardiac calcification", "suspicious lung nodules", "aortic aneurysm", "renal calculus",
    "tumors", "appendicitis", "hemorrhage",
)
MR_CONDITIONS = (
    "acute infarct", "hemorrhage", "multiple sclerosis", "meniscal tears", "fractures",
    "liver disease", "pancreatic lesions",
)
CTRATE_CONDITIONS = (
    "Medical material", "Arterial wall calcification", "Cardiomegaly", "Pericardial effusion",
    "Coronary artery wall calcification", "Hiatal hernia", "Lymphadenopathy", "Emphysema",
    "Atelectasis", "Lung nodule", "Lung opacity", "Pulmonary fibrotic sequela", "Pleural effusion",
    "Mosaic attenuation pattern", "Peribronchial thickening", "Consolidation", "Bronchiectasis",
    "Interlobular septal thickening",
)


class TaskKind(str, enum.Enum):
    CT_CLS = "CT_CLS"
    MR_CLS = "MR_CLS"
    CTRATE_CLS = "CTRATE_CLS"
    WSI_REPORT = "WSI_REPORT"
    TEMPORAL = "TEMPORAL"
    BBOX_LOC = "BBOX_LOC"
    LAB_EXTRACT = "LAB_EXTRACT"
    TEXT_MCQ = "TEXT_MCQ"
    EHRNOTE_MCQ = "EHRNOTE_MCQ"

    @property
    def is_classification(self) -> bool:
        return self in CLASSIFICATION_TASKS


CLASSIFICATION_TASKS = frozenset({TaskKind.CT_CLS, TaskKind.MR_CLS, TaskKind.CTRATE_CLS})
DEFAULT_CONDITIONS = {
    TaskKind.CT_CLS: CT_CONDITIONS,
    TaskKind.MR_CLS: MR_CONDITIONS,
    TaskKind.CTRATE_CLS: CTRATE_CONDITIONS,
}


def parse_temporal_label(value) -> TemporalClass:
    s = str(value).strip().upper()
    by_letter = {c.letter: c for c in TemporalClass}
    if s in by_letter:
        return by_letter[s]
    try:
        return TemporalClass(s)
    except ValueError:
        raise ValidationError(f"unknown temporal class {value!r}") from None


@dataclass(frozen=True)
class ManifestRecord:
    """One evaluation example.

    ``inputs`` holds image paths (relative paths resolve against ``base_dir``) and text fields;
    ``gold`` holds the reference answer in the shape the task kind expects.
    """

    example_id: str
    task_kind: TaskKind
    inputs: dict[str, Any]
    gold: dict[str, Any]
    conditions: tuple[str, ...] = ()
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if not str(self.example_id):
            raise ValidationError("example_id must be non-empty")
        object.__setattr__(self, "task_kind", TaskKind(self.task_kind))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        _check_shape(self)

    def resolve(self, path: str) -> str:
        p = Path(path)
        return str(p if p.is_absolute() else self.base_dir / p)

    def image_paths(self, key: str = "images") -> list[str]:
        value = self.inputs.get(key, [])
        if isinstance(value, str):
            value = [value]
        return [self.resolve(p) for p in value]

    def to_json(self) -> dict[str, Any]:
        out = {"schema_version": SCHEMA_VERSION, "example_id": self.example_id,
               "task_kind": self.task_kind.value, "inputs": self.inputs, "gold": self.gold}
        if self.conditions:
            out["conditions"] = list(self.conditions)
        return out


def _need(rec: ManifestRecord, where: dict, key: str, kind: type | tuple) -> Any:
    if key not in where:
        raise ValidationError(f"{rec.example_id}: {rec.task_kind.value} record needs {key!r}")
    if not isinstance(where[key], kind):
        raise ValidationError(f"{rec.example_id}: {key!r} has the wrong type")
    return where[key]


def _check_box(rec: ManifestRecord, box) -> None:
    if not (isinstance(box, list) and len(box) == 4 and all(isinstance(v, (int, float)) for v in box)):
        raise ValidationError(f"{rec.example_id}: gold box must be four numbers")
    y0, x0, y1, x1 = box
    if not (0 <= y0 <= y1 <= 1 and 0 <= x0 <= x1 <= 1):
        raise ValidationError(f"{rec.example_id}: gold box {box} is not a normalized [y0, x0, y1, x1]")


def _check_shape(rec: ManifestRecord) -> None:
    k, inp, gold = rec.task_kind, rec.inputs, rec.gold
    if k.is_classification:
        _need(rec, inp, "images", list)
        if not rec.conditions:
            raise ValidationError(f"{rec.example_id}: classification record needs conditions")
        labels = _need(rec, gold, "labels", dict)
        missing = [c for c in rec.conditions if not isinstance(labels.get(c), bool)]
        if missing:
            raise ValidationError(f"{rec.example_id}: no boolean gold label for {', '.join(missing)}")
        if len(set(rec.conditions)) != len(rec.conditions):
            raise ValidationError(f"{rec.example_id}: duplicate conditions")
    elif k is TaskKind.WSI_REPORT:
        _need(rec, inp, "images", list)
        _need(rec, inp, "type_procedure", str)
        _need(rec, gold, "reference", str)
    elif k is TaskKind.TEMPORAL:
        if len(_need(rec, inp, "images", list)) != 2:
            raise ValidationError(f"{rec.example_id}: temporal record needs [prior, current] images")
        _need(rec, inp, "pathology", str)
        parse_temporal_label(_need(rec, gold, "class", str))
    elif k is TaskKind.BBOX_LOC:
        _need(rec, inp, "image", str)
        _need(rec, inp, "object", str)
        _check_box(rec, _need(rec, gold, "box", list))
    elif k is TaskKind.LAB_EXTRACT:
        _need(rec, inp, "images", list)
        entries = _need(rec, gold, "entries", list)
        for e in entries:
            if not isinstance(e, dict) or set(e) - set(LAB_FIELDS):
                raise ValidationError(f"{rec.example_id}: gold entries use fields {', '.join(LAB_FIELDS)}")
    elif k in (TaskKind.TEXT_MCQ, TaskKind.EHRNOTE_MCQ):
        _need(rec, inp, "question", str)
        if k is TaskKind.EHRNOTE_MCQ:
            _need(rec, inp, "discharge_note", str)
            _need(rec, inp, "choices", dict)
        choice = _need(rec, gold, "choice", str)
        if len(choice) != 1 or not choice.isalpha():
            raise ValidationError(f"{rec.example_id}: gold choice must be one letter")


def record_from_json(obj: dict, base_dir: Path = Path(".")) -> ManifestRecord:
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported manifest schema_version {version}")
    try:
        kind = TaskKind(obj["task_kind"])
    except (KeyError, ValueError):
        raise ValidationError(f"record {obj.get('example_id')!r}: unknown task_kind {obj.get('task_kind')!r}") from None
    conditions = obj.get("conditions")
    if conditions is None and kind.is_classification:
        conditions = DEFAULT_CONDITIONS[kind]
    return ManifestRecord(
        example_id=str(obj.get("example_id", "")),
        task_kind=kind,
        inputs=dict(obj.get("inputs", {})),
        gold=dict(obj.get("gold", {})),
        conditions=tuple(conditions or ()),
        base_dir=base_dir,
    )


def load_manifest(path: str | Path) -> list[ManifestRecord]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not found: {path}")
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        records.append(record_from_json(obj, path.parent))
    check_unique(records)
    return records


def check_unique(records: Iterable[ManifestRecord]) -> None:
    seen = set()
    for r in records:
        if r.example_id in seen:
            raise ValidationError(f"duplicate example_id {r.example_id!r}")
        seen.add(r.example_id)


def write_manifest(records: Iterable[ManifestRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
