"""Raw volume + sidecar reading, PNG sequence writing.

A study directory holds one ``<stem>.meta`` sidecar per volume next to its
little-endian raw voxel file. Sidecar lines are ``key: value``::

    series_id: S1
    modality: CT                # CT or MR
    dims: 512,512,30            # width,height,n_slices
    spacing: 0.7,0.7            # x_mm,y_mm
    slice_thickness: 1.25       # one value per slice, or a single value for all
    orientation: AXIAL          # AXIAL, SAGITTAL, CORONAL, OTHER
    dtype: int16                # uint8, int16, uint16, int32, float32, float64
    data: s1.raw                # optional, defaults to <stem>.raw

Blank lines and ``#`` comments are ignored. Voxels are stored z-major
(slice by slice, each slice row by row).
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ValidationError
from .core import SliceSequence, VoxelVolume, vision_token_count

DTYPES = ("uint8", "int16", "uint16", "int32", "float32", "float64")
REQUIRED_KEYS = ("series_id", "modality", "dims", "slice_thickness", "orientation")


def parse_sidecar(text: str) -> dict[str, str]:
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ValidationError(f"sidecar line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    missing = [k for k in REQUIRED_KEYS if k not in fields]
    if missing:
        raise ValidationError(f"sidecar missing keys: {', '.join(missing)}")
    return fields


def _floats(value: str) -> list[float]:
    return [float(v) for v in value.replace(" ", "").split(",") if v]


def read_volume(meta_path: str | Path) -> VoxelVolume:
    meta_path = Path(meta_path)
    fields = parse_sidecar(meta_path.read_text())
    try:
        width, height, n = (int(v) for v in fields["dims"].split(","))
    except ValueError:
        raise ValidationError(f"{meta_path.name}: dims must be 'width,height,n_slices'") from None
    dtype = fields.get("dtype", "int16")
    if dtype not in DTYPES:
        raise ValidationError(f"{meta_path.name}: unsupported dtype {dtype!r}")
    data_path = meta_path.with_name(fields.get("data", meta_path.stem + ".raw"))
    raw = np.fromfile(data_path, dtype=np.dtype(dtype).newbyteorder("<"))
    if raw.size != width * height * n:
        raise ValidationError(
            f"{data_path.name}: {raw.size} voxels on disk, dims imply {width * height * n}"
        )
    thickness = _floats(fields["slice_thickness"])
    if len(thickness) == 1:
        thickness = thickness * n
    spacing = tuple(_floats(fields.get("spacing", "1,1"))[:2])
    return VoxelVolume(
        series_id=fields["series_id"],
        modality=fields["modality"].upper(),
        voxels=raw.astype(raw.dtype.newbyteorder("=")).reshape(n, height, width),
        spacing=spacing,
        slice_thickness_mm=thickness,
        orientation=fields["orientation"].upper(),
    )


def read_study(study_dir: str | Path) -> list[VoxelVolume]:
    metas = sorted(Path(study_dir).glob("*.meta"))
    return [read_volume(p) for p in metas]


def write_volume(volume: VoxelVolume, directory: str | Path, stem: str | None = None,
                 dtype: str = "int16") -> Path:
    """Write ``volume`` as raw + sidecar; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or volume.series_id
    w, h, n = volume.dims
    volume.voxels.astype(np.dtype(dtype).newbyteorder("<")).tofile(directory / f"{stem}.raw")
    lines = [
        f"series_id: {volume.series_id}",
        f"modality: {volume.modality.value}",
        f"dims: {w},{h},{n}",
        f"spacing: {volume.spacing[0]},{volume.spacing[1]}",
        "slice_thickness: " + ",".join(repr(t) for t in volume.slice_thickness_mm),
        f"orientation: {volume.orientation.value}",
        f"dtype: {dtype}",
        f"data: {stem}.raw",
    ]
    meta = directory / f"{stem}.meta"
    meta.write_text("\n".join(lines) + "\n")
    return meta


def encode_png(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))


def slice_filename(seq: int, series_id: str, z: int) -> str:
    return f"{seq:04}_{series_id}_{z:04}.png"


def write_sequence(sequence: SliceSequence, out_dir: str | Path, study: str) -> dict:
    """Write PNGs under ``out_dir/study`` and append one line to ``out_dir/manifest.jsonl``."""
    out_dir = Path(out_dir)
    study_dir = out_dir / study
    study_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for seq, entry in enumerate(sequence.entries):
        name = slice_filename(seq, entry.series_id, entry.z)
        (study_dir / name).write_bytes(encode_png(entry.image))
        files.append(f"{study}/{name}")
    record = {
        "study": study,
        "modality": sequence.modality.value,
        "source_series": sequence.source_series,
        "files": files,
        "global_indices": [e.global_index for e in sequence.entries],
        "vision_tokens": vision_token_count(len(files)),
        "warnings": sequence.warnings,
    }
    with open(out_dir / "manifest.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return record
