"""Slide directory reading and patch-set writing.

A slide directory contains ``slide.json`` and one PNG per stored level::

    {
      "slide_id": "S001",
      "caption": "colon biopsy",
      "base_magnification": 20,
      "levels": [
        {"magnification": 20, "file": "20x.png"},
        {"magnification": 5, "file": "5x.png"}
      ]
    }

Patch sets are written as ``{slide_id}/{mag}x/{row:04}_{col:04}.png`` with a
``{slide_id}/manifest.json`` listing the patches in emitted order.
"""
from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ValidationError
from ..volgrid.core import vision_token_count
from .core import PatchSet, SlideLevel, SlidePyramid

# gigapixel levels are expected here
Image.MAX_IMAGE_PIXELS = None


def load_slide_dir(path: str | Path) -> SlidePyramid:
    path = Path(path)
    manifest_path = path / "slide.json"
    if not manifest_path.is_file():
        raise ValidationError(f"{path}: missing slide.json")
    meta = json.loads(manifest_path.read_text())
    files = []
    levels = []
    for entry in meta.get("levels", []):
        file = path / entry["file"]
        with Image.open(file) as im:
            width, height = im.size
        levels.append(SlideLevel(float(entry["magnification"]), width, height))
        files.append(file)

    @lru_cache(maxsize=2)
    def level_array(i: int) -> np.ndarray:
        with Image.open(files[i]) as im:
            return np.asarray(im.convert("RGB"))

    def reader(i, x, y, w, h):
        return level_array(i)[y:y + h, x:x + w]

    return SlidePyramid(
        meta.get("slide_id", path.name),
        levels,
        reader,
        base_magnification=meta.get("base_magnification"),
        caption=meta.get("caption", ""),
    )


def write_slide_dir(path: str | Path, slide_id: str, images: dict[float, np.ndarray],
                    caption: str = "") -> Path:
    """Store per-level arrays as a slide directory (handy for synthetic slides)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    levels = []
    for mag in sorted(images, reverse=True):
        name = f"{mag:g}x.png"
        Image.fromarray(np.asarray(images[mag], dtype=np.uint8), "RGB").save(path / name)
        levels.append({"magnification": mag, "file": name})
    meta = {"slide_id": slide_id, "caption": caption,
            "base_magnification": max(images), "levels": levels}
    (path / "slide.json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def patch_relpath(slide_id: str, magnification: float, row: int, col: int) -> str:
    return f"{slide_id}/{magnification:g}x/{row:04}_{col:04}.png"


def write_patchset(patchset: PatchSet, out_dir: str | Path, slide_id: str) -> dict:
    out_dir = Path(out_dir)
    files = []
    for p in patchset.patches:
        rel = patch_relpath(slide_id, patchset.magnification, p.grid_row, p.grid_col)
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(p.png_bytes)
        files.append(rel)
    manifest = {
        "slide_id": slide_id,
        "magnification": patchset.magnification,
        "seed": patchset.seed,
        "cap": patchset.cap,
        "caption": patchset.slide_caption_label,
        "patches": [
            {"row": p.grid_row, "col": p.grid_col, "file": f}
            for p, f in zip(patchset.patches, files)
        ],
        "vision_tokens": vision_token_count(len(files)),
        "errors": patchset.errors,
    }
    (out_dir / slide_id).mkdir(parents=True, exist_ok=True)
    (out_dir / slide_id / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
