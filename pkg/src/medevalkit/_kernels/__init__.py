"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time. Set ``MEDEVALKIT_KERNELS=numpy`` to
force the fallback; ``numba`` (the default) silently falls back when numba is
not importable. Both backends are importable directly as ``numpy_backend`` and
``numba_backend`` (the latter is ``None`` without numba) for comparison.
"""
from __future__ import annotations

import logging
import os

from . import _numpy as numpy_backend

logger = logging.getLogger(__name__)

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba_backend = None

HAS_NUMBA = numba_backend is not None

_requested = os.environ.get("MEDEVALKIT_KERNELS", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    logger.warning("unknown MEDEVALKIT_KERNELS=%r, using numba when available", _requested)
    _requested = "numba"

if _requested == "numba" and HAS_NUMBA:
    active = numba_backend
    BACKEND = "numba"
else:
    active = numpy_backend
    BACKEND = "numpy"

window_to_u8 = active.window_to_u8
resize_bilinear_u8 = active.resize_bilinear_u8
hsv_tissue_candidates = active.hsv_tissue_candidates
cell_tissue_fraction = active.cell_tissue_fraction
lcs_length = active.lcs_length

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "numpy_backend",
    "numba_backend",
    "window_to_u8",
    "resize_bilinear_u8",
    "hsv_tissue_candidates",
    "cell_tissue_fraction",
    "lcs_length",
]
