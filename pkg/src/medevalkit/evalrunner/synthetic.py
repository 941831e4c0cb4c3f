"""Small synthetic manifests covering every task kind, for smoke tests and demos."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..volgrid.io import encode_png
from .manifest import DEFAULT_CONDITIONS, ManifestRecord, TaskKind, write_manifest

_HISTORIES = ("cough and fever for three days", "follow-up after trauma", "abdominal pain", "headache")
_PROCEDURES = ("colon, biopsy", "skin, excision", "prostate, core needle biopsy")
_REFERENCES = (
    "tubular adenoma with low grade dysplasia",
    "benign intradermal nevus, margins clear",
    "prostatic adenocarcinoma gleason score 3 + 4 = 7",
)
_OBJECTS = ("right lung", "left lung", "cardiac silhouette", "trachea")
_PATHOLOGIES = ("pleural effusion", "edema", "consolidation")
_LAB_POOL = (
    {"name": "Hemoglobin", "result": "13.5", "unit": "g/dL", "range": "12-16", "panel": "CBC",
     "specimen": "Blood", "sample_collection_time": "01-02-2024 08:30:00"},
    {"name": "Sodium", "result": "140", "unit": "mmol/L", "range": "135-145", "panel": "BMP",
     "method": "ISE", "specimen": "Serum"},
    {"name": "Creatinine", "result": "0.9", "unit": "mg/dL", "range": "0.6-1.2", "panel": "BMP"},
    {"name": "TSH", "result": "2.1", "unit": "mIU/L", "range": "0.4-4.0", "specimen": "Serum",
     "sample_collection_time": "03-02-2024 10:00:00"},
)


def _image(root: Path, name: str, rng: np.random.Generator, size: int = 16) -> str:
    """Write a random PNG at ``root/images/name`` and return its path relative to ``root``."""
    path = root / "images" / name
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    path.write_bytes(encode_png(pixels))
    return str(path.relative_to(root))


def synthetic_records(out_dir: str | Path, n_per_task: int = 3, seed: int = 0,
                      tasks: tuple[TaskKind, ...] = tuple(TaskKind), n_slices: int = 3) -> list[ManifestRecord]:
    """Records with small random PNGs written under ``out_dir/images``."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    records = []
    for kind in tasks:
        for i in range(n_per_task):
            eid = f"{kind.value.lower()}-{i:03d}"

            def img(name):
                return _image(out_dir, f"{eid}-{name}.png", rng)

            conditions: tuple[str, ...] = ()
            if kind.is_classification:
                conditions = DEFAULT_CONDITIONS[kind]
                inputs = {"images": [img(f"s{j}") for j in range(n_slices)],
                          "slice_indices": [2 * j for j in range(n_slices)],
                          "history": _HISTORIES[i % len(_HISTORIES)]}
                if kind is TaskKind.CTRATE_CLS:
                    inputs["history"] = ""
                gold = {"labels": {c: bool(rng.integers(0, 2)) for c in conditions}}
            elif kind is TaskKind.WSI_REPORT:
                inputs = {"images": [img(f"p{j}") for j in range(4)],
                          "type_procedure": _PROCEDURES[i % len(_PROCEDURES)]}
                gold = {"reference": _REFERENCES[i % len(_REFERENCES)]}
            elif kind is TaskKind.TEMPORAL:
                inputs = {"images": [img("prior"), img("current")],
                          "pathology": _PATHOLOGIES[i % len(_PATHOLOGIES)]}
                gold = {"class": "ABC"[int(rng.integers(0, 3))]}
            elif kind is TaskKind.BBOX_LOC:
                y0, x0 = (round(float(v), 3) for v in rng.uniform(0.0, 0.5, 2))
                h, w = (round(float(v), 3) for v in rng.uniform(0.1, 0.5, 2))
                inputs = {"image": img("cxr"), "object": _OBJECTS[i % len(_OBJECTS)]}
                gold = {"box": [y0, x0, round(y0 + h, 3), round(x0 + w, 3)]}
            elif kind is TaskKind.LAB_EXTRACT:
                k = 1 + i % len(_LAB_POOL)
                inputs = {"images": [img("page1")]}
                gold = {"entries": [dict(e) for e in _LAB_POOL[:k]]}
            elif kind is TaskKind.EHRNOTE_MCQ:
                inputs = {"discharge_note": f"Discharge summary {i}: admitted for pneumonia, treated, improved.",
                          "question": "Which antibiotic class was given?",
                          "choices": {c: f"option {c.lower()}" for c in "ABCDE"}}
                gold = {"choice": "ABCDE"[int(rng.integers(0, 5))]}
            else:
                inputs = {"question": f"Question {i}: which is the first-line therapy?\n(A) one\n(B) two\n"
                                      "(C) three\n(D) four"}
                gold = {"choice": "ABCD"[int(rng.integers(0, 4))]}
            records.append(ManifestRecord(eid, kind, inputs, gold, conditions, base_dir=out_dir))
    return records


def build_synthetic_manifest(out_dir: str | Path, **kw) -> Path:
    """Write images and ``manifest.jsonl`` under ``out_dir``; return the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = synthetic_records(out_dir, **kw)
    path = out_dir / "manifest.jsonl"
    write_manifest(records, path)
    return path
