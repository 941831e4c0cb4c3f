"""Whole-slide image tiling: tissue mask, magnification draw, patch grid, capping."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .. import _kernels
from ..errors import ValidationError
from ..volgrid.io import encode_png

logger = logging.getLogger(__name__)

PATCH_SIZE = 896
DEFAULT_CAP = 126
MASK_MAGNIFICATION = 5.0


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SlideLevel:
    magnification: float
    width: int
    height: int


# reader(level_index, x, y, w, h) -> (h, w, 3) uint8, region fully inside the level
RegionReader = Callable[[int, int, int, int, int], np.ndarray]


class SlidePyramid:
    """A multi-resolution slide with a region reader per stored level.

    Magnifications that are not stored are served by resampling the nearest
    stored level, preferring a higher magnification (downsampling) over
    upsampling.
    """

    def __init__(self, slide_id: str, levels: Sequence[SlideLevel], reader: RegionReader,
                 base_magnification: float | None = None, caption: str = ""):
        if not levels:
            raise ValidationError(f"{slide_id}: slide has no levels")
        self.slide_id = slide_id
        ranked = sorted(enumerate(levels), key=lambda item: -item[1].magnification)
        self.levels = [lv for _, lv in ranked]
        self._order = [i for i, _ in ranked]
        self._reader = reader
        self.base_magnification = float(base_magnification or self.levels[0].magnification)
        self.caption = caption
        top = self.levels[0]
        for lv in self.levels[1:]:
            ratio = lv.magnification / top.magnification
            if abs(lv.width - top.width * ratio) > 1 or abs(lv.height - top.height * ratio) > 1:
                raise ValidationError(
                    f"{slide_id}: level {lv.magnification:g}x dims {lv.width}x{lv.height} "
                    f"inconsistent with {top.magnification:g}x"
                )

    @classmethod
    def from_arrays(cls, slide_id: str, images: dict[float, np.ndarray], caption: str = "",
                    base_magnification: float | None = None) -> "SlidePyramid":
        mags = list(images)
        arrays = [np.ascontiguousarray(images[m], dtype=np.uint8) for m in mags]
        levels = [SlideLevel(float(m), a.shape[1], a.shape[0]) for m, a in zip(mags, arrays)]

        def reader(i, x, y, w, h):
            return arrays[i][y:y + h, x:x + w]

        return cls(slide_id, levels, reader, base_magnification, caption)

    def level_dims(self, magnification: float) -> tuple[int, int]:
        for lv in self.levels:
            if math.isclose(lv.magnification, magnification):
                return lv.width, lv.height
        top = self.levels[0]
        ratio = magnification / top.magnification
        return round(top.width * ratio), round(top.height * ratio)

    def _source_level(self, magnification: float) -> int:
        higher = [i for i, lv in enumerate(self.levels) if lv.magnification >= magnification - 1e-9]
        return higher[-1] if higher else 0

    def _read_stored(self, pos: int, x: int, y: int, w: int, h: int) -> np.ndarray:
        lv = self.levels[pos]
        out = np.zeros((h, w, 3), dtype=np.uint8)
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + w, lv.width), min(y + h, lv.height)
        if x1 > x0 and y1 > y0:
            region = np.asarray(self._reader(self._order[pos], x0, y0, x1 - x0, y1 - y0))
            if region.shape != (y1 - y0, x1 - x0, 3):
                raise ValidationError(
                    f"{self.slide_id}: reader returned shape {region.shape} for a "
                    f"{x1 - x0}x{y1 - y0} region"
                )
            out[y0 - y:y1 - y, x0 - x:x1 - x] = region
        return out

    def read_region(self, magnification: float, x: int, y: int, w: int, h: int) -> np.ndarray:
        """Read a ``w`` x ``h`` RGB region at ``magnification``; outside the slide is zero."""
        pos = self._source_level(magnification)
        src_mag = self.levels[pos].magnification
        if math.isclose(src_mag, magnification):
            return self._read_stored(pos, x, y, w, h)
        factor = src_mag / magnification
        sx, sy = int(math.floor(x * factor)), int(math.floor(y * factor))
        sw, sh = max(1, int(round(w * factor))), max(1, int(round(h * factor)))
        src = self._read_stored(pos, sx, sy, sw, sh)
        k = round(factor)
        if factor > 1 and math.isclose(factor, k) and sw == w * k and sh == h * k:
            return src.reshape(h, k, w, k, 3).mean(axis=(1, 3)).round().astype(np.uint8)
        return _kernels.resize_bilinear_u8(src, h, w)

    def level_image(self, magnification: float) -> np.ndarray:
        w, h = self.level_dims(magnification)
        return self.read_region(magnification, 0, 0, w, h)


@dataclass(frozen=True)
class MaskParams:
    s_min: float = 0.07
    v_min: float = 0.05
    v_max: float = 0.98
    struct_size: int = 3
    min_component: int = 64


@dataclass
class TissueMask:
    grid: np.ndarray
    scale_magnification: float = MASK_MAGNIFICATION
    # intermediate masks keyed "candidate", "morphology"; kept for inspection
    stages: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


def tissue_mask(slide: SlidePyramid, params: MaskParams | None = None) -> TissueMask:
    """Three-stage HSV tissue segmentation on the 5x level.

    1. saturation/value thresholds, 2. closing then opening (restricted to the
    stage-1 candidates), 3. removal of small 8-connected components.
    """
    p = params or MaskParams()
    w, h = slide.level_dims(MASK_MAGNIFICATION)
    if w <= 0 or h <= 0:
        raise ValidationError(f"{slide.slide_id}: zero-area slide")
    rgb = slide.level_image(MASK_MAGNIFICATION)

    candidate = _kernels.hsv_tissue_candidates(rgb, p.s_min, p.v_min, p.v_max)
    se = np.ones((p.struct_size, p.struct_size), dtype=bool)
    closed = ndimage.binary_closing(candidate, structure=se)
    morph = ndimage.binary_opening(closed, structure=se) & candidate

    labels, n = ndimage.label(morph, structure=np.ones((3, 3), dtype=bool))
    if n:
        sizes = np.bincount(labels.ravel())
        keep = sizes >= p.min_component
        keep[0] = False
        final = keep[labels]
    else:
        final = morph.copy()
    return TissueMask(final, MASK_MAGNIFICATION, {"candidate": candidate, "morphology": morph})


@dataclass(frozen=True)
class MagnificationDistribution:
    p5: float = 0.34
    p10: float = 0.33
    p20: float = 0.33

    def __post_init__(self):
        probs = self.probabilities
        if any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValidationError(f"magnification probabilities must be >= 0 and sum to 1, got {probs}")

    @property
    def magnifications(self) -> tuple[float, float, float]:
        return (5.0, 10.0, 20.0)

    @property
    def probabilities(self) -> tuple[float, float, float]:
        return (self.p5, self.p10, self.p20)


def choose_magnification(dist: MagnificationDistribution, rng_seed=None) -> float:
    u = _rng(rng_seed).random()
    acc = 0.0
    for mag, p in zip(dist.magnifications, dist.probabilities):
        acc += p
        if u < acc:
            return mag
    # u landed in float slack above the cumulative sum
    return [m for m, p in zip(dist.magnifications, dist.probabilities) if p > 0][-1]


def grid_shape(mask: TissueMask, target_mag: float, patch_size: int = PATCH_SIZE) -> tuple[int, int, float]:
    cell = patch_size * mask.scale_magnification / target_mag
    h, w = mask.shape
    return math.ceil(h / cell - 1e-9), math.ceil(w / cell - 1e-9), cell


def grid_candidates(mask: TissueMask, target_mag: float, min_fraction: float = 0.10,
                    patch_size: int = PATCH_SIZE) -> list[tuple[int, int]]:
    """Grid cells (row-major) whose mean-pooled tissue fraction reaches ``min_fraction``."""
    if target_mag not in (5, 10, 20):
        raise ValidationError(f"target magnification must be 5, 10 or 20, got {target_mag}")
    rows, cols, cell = grid_shape(mask, target_mag, patch_size)
    if rows == 0 or cols == 0:
        return []
    frac = _kernels.cell_tissue_fraction(mask.grid, cell, rows, cols)
    hit = (frac >= min_fraction) & (frac > 0)
    return [(int(r), int(c)) for r, c in zip(*np.nonzero(hit))]


@dataclass(frozen=True)
class Patch:
    grid_row: int
    grid_col: int
    png_bytes: bytes


@dataclass
class PatchSet:
    magnification: float
    patches: list[Patch]
    slide_caption_label: str = ""
    cap: int | None = DEFAULT_CAP
    seed: int | None = None
    errors: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.cap is not None and len(self.patches) > self.cap:
            raise ValidationError(f"{len(self.patches)} patches exceed the cap of {self.cap}")
        keys = [(p.grid_row, p.grid_col) for p in self.patches]
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise ValidationError("patches must be in strictly increasing row-major grid order")

    def __len__(self) -> int:
        return len(self.patches)

    @property
    def positions(self) -> list[tuple[int, int]]:
        return [(p.grid_row, p.grid_col) for p in self.patches]


def extract_patches(slide: SlidePyramid, candidates: Sequence[tuple[int, int]], target_mag: float,
                    patch_size: int = PATCH_SIZE, max_workers: int = 1) -> PatchSet:
    """Read and PNG-encode one patch per candidate cell; failed reads are recorded and skipped."""
    if not candidates:
        raise ValidationError(f"{slide.slide_id}: no candidate cells to extract")
    cells = sorted(set(candidates))

    def read(cell):
        r, c = cell
        try:
            rgb = slide.read_region(target_mag, c * patch_size, r * patch_size, patch_size, patch_size)
            return Patch(r, c, encode_png(rgb)), None
        except Exception as exc:  # noqa: BLE001 - one bad region must not sink the slide
            return None, f"cell ({r}, {c}): {type(exc).__name__}: {exc}"

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(read, cells))
    else:
        results = [read(cell) for cell in cells]

    patches, errors = [], []
    for patch, err in results:
        if err:
            logger.warning("%s: %s", slide.slide_id, err)
            errors.append(err)
        else:
            patches.append(patch)
    return PatchSet(target_mag, patches, slide.caption, cap=None, errors=errors)


def subsample_indices(n: int, cap: int, rng_seed=None) -> list[int]:
    if n <= cap:
        return list(range(n))
    return sorted(int(i) for i in _rng(rng_seed).choice(n, size=cap, replace=False))


def subsample_patches(patchset: PatchSet, cap: int = DEFAULT_CAP, rng_seed=None) -> PatchSet:
    """Uniformly keep ``cap`` patches without replacement, preserving grid order."""
    keep = subsample_indices(len(patchset.patches), cap, rng_seed)
    return PatchSet(
        patchset.magnification,
        [patchset.patches[i] for i in keep],
        patchset.slide_caption_label,
        cap=cap,
        seed=patchset.seed,
        errors=list(patchset.errors),
    )


def process_slide(slide: SlidePyramid, seed: int, cap: int = DEFAULT_CAP,
                  dist: MagnificationDistribution | None = None, params: MaskParams | None = None,
                  min_fraction: float = 0.10, max_workers: int = 1) -> PatchSet:
    """Full pipeline. Equivalent to extract-all then ``subsample_patches`` with the same
    generator, but only the selected cells are read."""
    rng = np.random.default_rng(seed)
    mask = tissue_mask(slide, params)
    mag = choose_magnification(dist or MagnificationDistribution(), rng)
    cells = grid_candidates(mask, mag, min_fraction)
    if not cells:
        raise ValidationError(f"{slide.slide_id}: no tissue found at {mag:g}x")
    keep = subsample_indices(len(cells), cap, rng)
    ps = extract_patches(slide, [cells[i] for i in keep], mag, max_workers=max_workers)
    ps.cap = cap
    ps.seed = seed
    return ps
