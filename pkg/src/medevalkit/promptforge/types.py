"""Prompt parts, typed answers and the ParseMiss sentinel value."""
from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ValidationError

LAB_FIELDS = ("name", "result", "unit", "range", "panel", "method", "specimen", "sample_collection_time")
TIME_PATTERN = re.compile(r"^\d{2}-\d{2}-\d{4} \d{2}:\d{2}:\d{2}$")


@dataclass(frozen=True)
class ParseMiss:
    """No parseable answer in a reply. Falsy, so ``if not parsed`` catches it."""

    reason: str = "unparseable"

    def __bool__(self) -> bool:
        return False


class PartKind(str, enum.Enum):
    TEXT = "TEXT"
    IMAGE = "IMAGE"


@dataclass(frozen=True)
class ImageRef:
    """A prepared PNG, either on disk or held in memory."""

    path: str | None = None
    data: bytes | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.path is None) == (self.data is None):
            raise ValidationError("ImageRef needs exactly one of path or data")
        if self.path is not None and not Path(self.path).is_file():
            raise ValidationError(f"image not found: {self.path}")

    @classmethod
    def from_array(cls, rgb: np.ndarray) -> "ImageRef":
        from ..volgrid.io import encode_png

        return cls(data=encode_png(rgb))

    def png_bytes(self) -> bytes:
        if self.data is not None:
            return self.data
        return Path(self.path).read_bytes()


@dataclass(frozen=True)
class Part:
    kind: PartKind
    text: str | None = None
    image: ImageRef | None = None

    @classmethod
    def of_text(cls, text: str) -> "Part":
        return cls(PartKind.TEXT, text=text)

    @classmethod
    def of_image(cls, image: ImageRef) -> "Part":
        return cls(PartKind.IMAGE, image=image)


@dataclass
class RenderedPrompt:
    parts: list[Part]
    system_text: str | None = None
    temperature: float = 0.0
    template_id: str = ""

    def __post_init__(self):
        if not self.parts:
            raise ValidationError("a rendered prompt needs at least one part")

    @property
    def image_count(self) -> int:
        return sum(p.kind is PartKind.IMAGE for p in self.parts)

    @property
    def text(self) -> str:
        """Concatenated text parts (images omitted)."""
        return "".join(p.text for p in self.parts if p.kind is PartKind.TEXT)

    def digest(self) -> str:
        h = hashlib.sha256()
        header = {"system": self.system_text, "temperature": self.temperature,
                  "template": self.template_id}
        h.update(json.dumps(header, sort_keys=True).encode())
        for p in self.parts:
            if p.kind is PartKind.TEXT:
                h.update(b"T" + p.text.encode("utf-8") + b"\x00")
            else:
                h.update(b"I" + hashlib.sha256(p.image.png_bytes()).digest())
        return h.hexdigest()


@dataclass(frozen=True)
class BBox:
    y0: float
    x0: float
    y1: float
    x1: float
    label: str = ""

    def __post_init__(self):
        if not (0.0 <= self.y0 <= self.y1 <= 1.0 and 0.0 <= self.x0 <= self.x1 <= 1.0):
            raise ValidationError(f"invalid normalized box {self.as_list()}")

    def as_list(self) -> list[float]:
        return [self.y0, self.x0, self.y1, self.x1]

    @property
    def area(self) -> float:
        return (self.y1 - self.y0) * (self.x1 - self.x0)


@dataclass(frozen=True)
class LabTestEntry:
    name: str
    result: str = ""
    unit: str = ""
    range: str = ""
    panel: str = ""
    method: str = ""
    specimen: str = ""
    sample_collection_time: str = ""

    def __post_init__(self):
        if not self.name.strip():
            raise ValidationError("lab test entry needs a name")
        if self.sample_collection_time and not TIME_PATTERN.match(self.sample_collection_time):
            raise ValidationError(
                f"sample_collection_time {self.sample_collection_time!r} is not DD-MM-YYYY HH:MM:SS"
            )

    def as_dict(self) -> dict[str, str]:
        return {f: getattr(self, f) for f in LAB_FIELDS}


class TemporalClass(str, enum.Enum):
    IMPROVED = "IMPROVED"
    STABLE = "STABLE"
    WORSENED = "WORSENED"

    @property
    def letter(self) -> str:
        return {"IMPROVED": "A", "STABLE": "B", "WORSENED": "C"}[self.value]


class AnswerKind(str, enum.Enum):
    YES_NO = "YES_NO"
    CHOICE = "CHOICE"
    FREE_TEXT = "FREE_TEXT"
    BBOXES = "BBOXES"
    LAB_ENTRIES = "LAB_ENTRIES"
    TEMPORAL = "TEMPORAL"


@dataclass
class ParsedAnswer:
    kind: AnswerKind
    value: Any
    raw_text: str
