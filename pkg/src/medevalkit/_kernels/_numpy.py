"""Pure-numpy implementations of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and the
same floating point operation order, so both backends produce identical bytes.
"""
from __future__ import annotations

import numpy as np


def window_to_u8(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    t = (values.astype(np.float64) - lo) / (hi - lo)
    t = np.clip(t, 0.0, 1.0)
    return np.floor(255.0 * t + 0.5).astype(np.uint8)


def resize_bilinear_u8(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w, n_ch = img.shape
    src = img.astype(np.float64)

    def _axis(n_out, n_in):
        scale = n_in / n_out
        pos = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
        pos = np.clip(pos, 0.0, n_in - 1.0)
        i0 = np.floor(pos).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, pos - i0

    y0, y1, wy = _axis(out_h, in_h)
    x0, x1, wx = _axis(out_w, in_w)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    a = src[y0][:, x0]
    b = src[y0][:, x1]
    c = src[y1][:, x0]
    d = src[y1][:, x1]
    top = (1.0 - wx) * a + wx * b
    bot = (1.0 - wx) * c + wx * d
    val = (1.0 - wy) * top + wy * bot
    out = np.floor(val + 0.5)
    return np.clip(out, 0.0, 255.0).astype(np.uint8).reshape(out_h, out_w, n_ch)


def hsv_tissue_candidates(rgb: np.ndarray, s_min: float, v_min: float, v_max: float) -> np.ndarray:
    px = rgb.astype(np.float64)
    cmax = px.max(axis=2)
    cmin = px.min(axis=2)
    v = cmax / 255.0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(cmax > 0.0, (cmax - cmin) / cmax, 0.0)
    return (s >= s_min) & (v >= v_min) & (v <= v_max)


def cell_tissue_fraction(mask: np.ndarray, cell: float, n_rows: int, n_cols: int) -> np.ndarray:
    h, w = mask.shape
    row_of = np.floor(np.arange(h, dtype=np.float64) / cell).astype(np.int64)
    col_of = np.floor(np.arange(w, dtype=np.float64) / cell).astype(np.int64)
    counts = np.zeros((n_rows, n_cols), dtype=np.float64)
    ys, xs = np.nonzero(mask)
    r = row_of[ys]
    c = col_of[xs]
    keep = (r < n_rows) & (c < n_cols)
    np.add.at(counts, (r[keep], c[keep]), 1.0)
    edges_r = np.ceil(np.arange(n_rows + 1, dtype=np.float64) * cell)
    edges_c = np.ceil(np.arange(n_cols + 1, dtype=np.float64) * cell)
    area = np.diff(edges_r)[:, None] * np.diff(edges_c)[None, :]
    return counts / area


def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    for tok in a:
        match = b == tok
        cand = np.empty_like(prev)
        cand[0] = 0
        cand[1:] = np.where(match, prev[:-1] + 1, prev[1:])
        # new[j] = max(new[j-1], old[j], old[j-1] + 1 on match), i.e. a prefix max
        prev = np.maximum.accumulate(np.maximum(cand, prev))
    return int(prev[-1])
