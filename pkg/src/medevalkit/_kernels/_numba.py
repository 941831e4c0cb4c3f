"""Numba-compiled kernels. Semantics mirror ``_numpy`` exactly."""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _window_2d(values, lo, hi, out):
    h, w = values.shape
    span = hi - lo
    for i in range(h):
        for j in range(w):
            t = (values[i, j] - lo) / span
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            out[i, j] = np.uint8(math.floor(255.0 * t + 0.5))


def window_to_u8(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    v = np.ascontiguousarray(values, dtype=np.float64)
    flat = v.reshape(-1, v.shape[-1]) if v.ndim >= 2 else v.reshape(1, -1)
    out = np.empty(flat.shape, dtype=np.uint8)
    _window_2d(flat, float(lo), float(hi), out)
    return out.reshape(v.shape)


@njit(cache=True)
def _axis_weights(n_out, n_in):
    scale = n_in / n_out
    i0 = np.empty(n_out, dtype=np.int64)
    i1 = np.empty(n_out, dtype=np.int64)
    wt = np.empty(n_out, dtype=np.float64)
    for k in range(n_out):
        pos = (k + 0.5) * scale - 0.5
        if pos < 0.0:
            pos = 0.0
        elif pos > n_in - 1.0:
            pos = n_in - 1.0
        lo = int(math.floor(pos))
        i0[k] = lo
        i1[k] = min(lo + 1, n_in - 1)
        wt[k] = pos - lo
    return i0, i1, wt


@njit(cache=True)
def _resize(src, out_h, out_w):
    in_h, in_w, n_ch = src.shape
    y0, y1, wy = _axis_weights(out_h, in_h)
    x0, x1, wx = _axis_weights(out_w, in_w)
    out = np.empty((out_h, out_w, n_ch), dtype=np.uint8)
    for i in range(out_h):
        for j in range(out_w):
            for c in range(n_ch):
                a = float(src[y0[i], x0[j], c])
                b = float(src[y0[i], x1[j], c])
                cc = float(src[y1[i], x0[j], c])
                d = float(src[y1[i], x1[j], c])
                top = (1.0 - wx[j]) * a + wx[j] * b
                bot = (1.0 - wx[j]) * cc + wx[j] * d
                val = math.floor((1.0 - wy[i]) * top + wy[i] * bot + 0.5)
                if val < 0.0:
                    val = 0.0
                elif val > 255.0:
                    val = 255.0
                out[i, j, c] = np.uint8(val)
    return out


def resize_bilinear_u8(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    return _resize(np.ascontiguousarray(img, dtype=np.uint8), int(out_h), int(out_w))


@njit(cache=True)
def _hsv_candidates(rgb, s_min, v_min, v_max):
    h, w, _ = rgb.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for i in range(h):
        for j in range(w):
            r = float(rgb[i, j, 0])
            g = float(rgb[i, j, 1])
            b = float(rgb[i, j, 2])
            cmax = max(r, g, b)
            cmin = min(r, g, b)
            v = cmax / 255.0
            s = (cmax - cmin) / cmax if cmax > 0.0 else 0.0
            out[i, j] = s >= s_min and v >= v_min and v <= v_max
    return out


def hsv_tissue_candidates(rgb: np.ndarray, s_min: float, v_min: float, v_max: float) -> np.ndarray:
    return _hsv_candidates(
        np.ascontiguousarray(rgb, dtype=np.uint8), float(s_min), float(v_min), float(v_max)
    )


@njit(cache=True)
def _cell_fraction(mask, cell, n_rows, n_cols):
    h, w = mask.shape
    counts = np.zeros((n_rows, n_cols), dtype=np.float64)
    for i in range(h):
        r = int(math.floor(i / cell))
        if r >= n_rows:
            continue
        for j in range(w):
            if mask[i, j]:
                c = int(math.floor(j / cell))
                if c < n_cols:
                    counts[r, c] += 1.0
    for r in range(n_rows):
        rh = math.ceil((r + 1) * cell) - math.ceil(r * cell)
        for c in range(n_cols):
            cw = math.ceil((c + 1) * cell) - math.ceil(c * cell)
            counts[r, c] = counts[r, c] / (rh * cw)
    return counts


def cell_tissue_fraction(mask: np.ndarray, cell: float, n_rows: int, n_cols: int) -> np.ndarray:
    return _cell_fraction(
        np.ascontiguousarray(mask, dtype=np.bool_), float(cell), int(n_rows), int(n_cols)
    )


@njit(cache=True)
def _lcs(a, b):
    n = b.shape[0]
    prev = np.zeros(n + 1, dtype=np.int64)
    cur = np.zeros(n + 1, dtype=np.int64)
    for i in range(a.shape[0]):
        for j in range(1, n + 1):
            if a[i] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[n]


def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
    if a.size == 0 or b.size == 0:
        return 0
    return int(_lcs(np.ascontiguousarray(a, dtype=np.int64), np.ascontiguousarray(b, dtype=np.int64)))
