"""Total parsers for model replies. Each returns a typed value or ``ParseMiss``."""
from __future__ import annotations

import ast
import json
import math
import re
from datetime import datetime

from ..errors import ValidationError
from .types import LAB_FIELDS, TIME_PATTERN, BBox, LabTestEntry, ParseMiss, TemporalClass

FINAL_ANSWER = "final answer"
DIAGNOSIS_MARKER = "the most likely diagnosis is"

_PAIRS = {"(": ")", "[": "]", '"': '"', "'": "'", "`": "`", "“": "”"}
_TRAILING = ".!?;,:"
_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*")
_CHOICE_RE = re.compile(r"^\(?([A-Za-z])\)?(?=$|[\s.:,;)\]])")


def _clean_answer(s: str) -> str:
    prev = None
    while s != prev:
        prev = s
        s = s.strip().lstrip(":,").strip().strip("*").strip()
        s = s.rstrip(_TRAILING)
        if len(s) >= 2 and _PAIRS.get(s[0]) == s[-1]:
            s = s[1:-1]
    return s


def _last_marker(text: str, marker: str):
    last = None
    for m in re.finditer(re.escape(marker), text, flags=re.IGNORECASE):
        last = m
    return last


def parse_final_answer(text: str, marker: str = FINAL_ANSWER) -> str | ParseMiss:
    """Answer text after the last case-insensitive ``marker``, up to end of line."""
    if not isinstance(text, str):
        return ParseMiss("reply is not text")
    m = _last_marker(text, marker)
    if m is None:
        return ParseMiss(f"no {marker!r} marker")
    answer = _clean_answer(text[m.end():].split("\n", 1)[0])
    return answer if answer else ParseMiss(f"empty answer after {marker!r}")


def parse_yes_no(text: str) -> bool | ParseMiss:
    ans = parse_final_answer(text)
    if isinstance(ans, ParseMiss):
        return ans
    low = ans.lower()
    if low.startswith("yes"):
        return True
    if low.startswith("no"):
        return False
    return ParseMiss(f"not a yes/no answer: {ans!r}")


def _choice_letter(answer: str, letters: str) -> str | None:
    m = _CHOICE_RE.match(answer.strip())
    if m and m.group(1).upper() in letters:
        return m.group(1).upper()
    return None


def parse_choice(text: str, letters: str = "ABCDE",
                 markers: tuple[str, ...] = (FINAL_ANSWER, DIAGNOSIS_MARKER)) -> str | ParseMiss:
    """Choice letter after whichever marker occurs last in the reply."""
    if not isinstance(text, str):
        return ParseMiss("reply is not text")
    found = [(m.start(), marker) for marker in markers if (m := _last_marker(text, marker))]
    if not found:
        return ParseMiss("no answer marker")
    _, marker = max(found)
    ans = parse_final_answer(text, marker)
    if isinstance(ans, ParseMiss):
        return ans
    letter = _choice_letter(ans, letters.upper())
    return letter if letter else ParseMiss(f"no choice letter in {ans!r}")


_TEMPORAL_WORDS = (("improv", TemporalClass.IMPROVED), ("stab", TemporalClass.STABLE),
                   ("wors", TemporalClass.WORSENED))


def parse_temporal(text: str) -> TemporalClass | ParseMiss:
    ans = parse_final_answer(text)
    if isinstance(ans, ParseMiss):
        return ans
    letter = _choice_letter(ans, "ABC")
    if letter:
        return {"A": TemporalClass.IMPROVED, "B": TemporalClass.STABLE, "C": TemporalClass.WORSENED}[letter]
    low = ans.lower()
    for prefix, cls in _TEMPORAL_WORDS:
        if low.startswith(prefix):
            return cls
    return ParseMiss(f"not a temporal class: {ans!r}")


def _balanced_span(text: str, start: int) -> str | None:
    depth = 0
    for i in range(start, len(text)):
        ch = text[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def find_first_array(text: str) -> list | None:
    """First well-formed array literal (JSON, or a Python literal as a fallback)."""
    if not isinstance(text, str):
        return None
    text = _FENCE_RE.sub("", text)
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\[", text):
        pos = m.start()
        try:
            value, _ = decoder.raw_decode(text, pos)
        except (json.JSONDecodeError, RecursionError):
            span = _balanced_span(text, pos)
            if span is None:
                continue
            try:
                value = ast.literal_eval(span)
            except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
                continue
        if isinstance(value, list):
            return value
    return None


_COORD_KEYS = ("box_2d", "bbox", "box", "box2d", "coordinates", "coords")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _coords_of(item: dict):
    for key in _COORD_KEYS:
        if key in item:
            return item[key]
    for value in item.values():
        if isinstance(value, list) and len(value) == 4 and all(_is_number(v) for v in value):
            return value
    return None


def parse_bboxes(text: str, diagnostics: list[str] | None = None) -> list[BBox] | ParseMiss:
    """Boxes from a JSON list of ``{"label": ..., "box_2d": [y0, x0, y1, x1]}`` objects.

    Coordinates are clamped into [0, 1] and each axis pair is sorted.
    """
    diag = diagnostics if diagnostics is not None else []
    items = find_first_array(text)
    if items is None:
        return ParseMiss("no array literal")
    boxes = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            diag.append(f"element {i}: not an object")
            continue
        label = item.get("label")
        if not isinstance(label, str):
            diag.append(f"element {i}: missing text label")
            continue
        coords = _coords_of(item)
        if not (isinstance(coords, (list, tuple)) and len(coords) == 4 and all(_is_number(v) for v in coords)):
            diag.append(f"element {i}: coordinates are not four numbers")
            continue
        y0, x0, y1, x1 = (min(max(float(v), 0.0), 1.0) for v in coords)
        y0, y1 = sorted((y0, y1))
        x0, x1 = sorted((x0, x1))
        boxes.append(BBox(y0, x0, y1, x1, label))
    return boxes


def canonical_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return value.strip()
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


_TIME_FORMATS = (
    "%d-%m-%Y %H:%M:%S", "%d-%m-%Y %H:%M", "%d/%m/%Y %H:%M:%S", "%d/%m/%Y %H:%M",
    "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%d-%m-%Y", "%Y-%m-%d",
)


def normalize_collection_time(raw: str) -> str | None:
    """Return the value in DD-MM-YYYY HH:MM:SS, or None if no known format matches."""
    raw = raw.strip()
    if not raw or TIME_PATTERN.match(raw):
        return raw
    for fmt in _TIME_FORMATS:
        try:
            return datetime.strptime(raw, fmt).strftime("%d-%m-%Y %H:%M:%S")
        except ValueError:
            continue
    return None


def _field_key(key) -> str:
    return re.sub(r"[\s\-]+", "_", str(key).strip().lower())


def entries_from_objects(items: list, diagnostics: list[str] | None = None) -> list[LabTestEntry]:
    diag = diagnostics if diagnostics is not None else []
    entries = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            diag.append(f"element {i}: not an object")
            continue
        fields = {_field_key(k): v for k, v in item.items()}
        values = {f: canonical_text(fields.get(f)) for f in LAB_FIELDS}
        if not values["name"]:
            diag.append(f"element {i}: empty name")
            continue
        t = normalize_collection_time(values["sample_collection_time"])
        if t is None:
            diag.append(f"element {i}: unrecognised time {values['sample_collection_time']!r}, dropped")
            t = ""
        values["sample_collection_time"] = t
        try:
            entries.append(LabTestEntry(**values))
        except ValidationError as exc:  # pragma: no cover - guarded above
            diag.append(f"element {i}: {exc}")
    return entries


def parse_lab_entries(text: str, diagnostics: list[str] | None = None) -> list[LabTestEntry] | ParseMiss:
    items = find_first_array(text)
    if items is None:
        return ParseMiss("no array literal")
    return entries_from_objects(items, diagnostics)
