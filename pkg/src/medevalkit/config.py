"""Top-level configuration: every tunable default in one JSON-overridable structure."""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .errors import ValidationError

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "log_level": "WARNING",
    "volume": {
        "ct_windows": [[-1024.0, 1024.0], [-135.0, 215.0], [0.0, 80.0]],
        "cap": 85,
        "image_size": 896,
        "max_slice_px": 512,
        "min_slices": 5,
        "thickness_tol_mm": 1e-6,
    },
    "wsi": {
        "cap": 126,
        "magnification_probs": [0.34, 0.33, 0.33],
        "s_min": 0.07,
        "v_min": 0.05,
        "v_max": 0.98,
        "struct_size": 3,
        "min_component": 64,
        "min_tissue_fraction": 0.10,
        "workers": 1,
    },
    "scoring": {
        "jaccard_threshold": 0.8,
    },
    "endpoint": {
        "model": "medgemma",
        "model_kind": "MEDGEMMA",
        "temperature": 0.0,
        "max_output_tokens": 1024,
        "max_in_flight": 8,
        "retries": 3,
        "backoff_s": 0.5,
        "timeout_s": 120.0,
    },
}


def _type_ok(default: Any, value: Any) -> bool:
    if isinstance(default, bool) or isinstance(value, bool):
        return isinstance(default, bool) and isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float))
    return isinstance(value, type(default))


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ValidationError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValidationError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            if not _type_ok(base[key], value):
                raise ValidationError(f"config key {where!r} has the wrong type")
            out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict[str, Any]:
    """Defaults, then the JSON file at ``path``, then ``overrides`` (same nesting)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg
