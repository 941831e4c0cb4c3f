"""CT/MR volume to 2D RGB slice sequence conversion."""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _kernels
from ..errors import NoAdmissibleVolumes, ValidationError

logger = logging.getLogger(__name__)

TOKENS_PER_IMAGE = 256
DEFAULT_CAP = 85
IMAGE_SIZE = 896


class Modality(str, enum.Enum):
    CT = "CT"
    MR = "MR"


class Orientation(str, enum.Enum):
    AXIAL = "AXIAL"
    SAGITTAL = "SAGITTAL"
    CORONAL = "CORONAL"
    OTHER = "OTHER"


class DegenerateVolumeWarning(UserWarning):
    """An MR volume has max == min and was mapped to all-zero slices."""


def _check_finite(values: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        pos = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValidationError(f"non-finite voxel in {what} at position {pos}")


@dataclass(frozen=True)
class WindowSpec:
    lo_hu: float
    hi_hu: float

    def __post_init__(self):
        if not self.lo_hu < self.hi_hu:
            raise ValidationError(f"window requires lo < hi, got ({self.lo_hu}, {self.hi_hu})")


# R, G, B
CT_WINDOWS: tuple[WindowSpec, WindowSpec, WindowSpec] = (
    WindowSpec(-1024.0, 1024.0),
    WindowSpec(-135.0, 215.0),
    WindowSpec(0.0, 80.0),
)


@dataclass
class VoxelVolume:
    """A decoded scalar volume.

    ``voxels`` is indexed ``[z, y, x]``; ``dims`` reports ``(width, height, n_slices)``.
    CT voxels are Hounsfield Units, MR voxels are arbitrary nonnegative scalars.
    """

    series_id: str
    modality: Modality
    voxels: np.ndarray
    spacing: tuple[float, float] = (1.0, 1.0)
    slice_thickness_mm: Sequence[float] = ()
    orientation: Orientation = Orientation.AXIAL

    def __post_init__(self):
        self.modality = Modality(self.modality)
        self.orientation = Orientation(self.orientation)
        self.voxels = np.asarray(self.voxels)
        if self.voxels.ndim != 3:
            raise ValidationError(f"{self.series_id}: voxels must be 3D [z, y, x], got shape {self.voxels.shape}")
        n = self.voxels.shape[0]
        if n < 1:
            raise ValidationError(f"{self.series_id}: volume has no slices")
        if not self.slice_thickness_mm:
            self.slice_thickness_mm = [1.0] * n
        self.slice_thickness_mm = [float(t) for t in self.slice_thickness_mm]
        if len(self.slice_thickness_mm) != n:
            raise ValidationError(
                f"{self.series_id}: {len(self.slice_thickness_mm)} thickness values for {n} slices"
            )
        if any(not (t > 0 and math.isfinite(t)) for t in self.slice_thickness_mm):
            raise ValidationError(f"{self.series_id}: slice thickness must be positive")
        if self.voxels.dtype.kind == "f":
            _check_finite(self.voxels, self.series_id)

    @property
    def dims(self) -> tuple[int, int, int]:
        n, h, w = self.voxels.shape
        return (w, h, n)

    @property
    def n_slices(self) -> int:
        return self.voxels.shape[0]


@dataclass(frozen=True)
class StackCriteria:
    max_slice_px: int = 512
    required_orientation: Orientation = Orientation.AXIAL
    uniform_thickness: bool = True
    min_slices: int = 5
    thickness_tol_mm: float = 1e-6


@dataclass
class SliceEntry:
    global_index: int
    image: np.ndarray
    series_id: str
    z: int


@dataclass
class SliceSequence:
    entries: list[SliceEntry]
    modality: Modality
    source_series: list[str]
    cap: int = DEFAULT_CAP
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.entries) > self.cap:
            raise ValidationError(f"sequence holds {len(self.entries)} slices, cap is {self.cap}")
        idx = [e.global_index for e in self.entries]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError("global indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def images(self) -> list[np.ndarray]:
        return [e.image for e in self.entries]


def window_ct_slice(hu_slice: np.ndarray, windows: Sequence[WindowSpec] = CT_WINDOWS) -> np.ndarray:
    """Map a 2D Hounsfield-unit slice to an ``(H, W, 3)`` uint8 image, one window per channel."""
    hu = np.asarray(hu_slice, dtype=np.float64)
    if hu.ndim != 2:
        raise ValidationError(f"expected a 2D slice, got shape {hu.shape}")
    if len(windows) != 3:
        raise ValidationError("need exactly three channel windows (R, G, B)")
    _check_finite(hu, "CT slice")
    return np.stack([_kernels.window_to_u8(hu, w.lo_hu, w.hi_hu) for w in windows], axis=-1)


def _mr_range(volume: VoxelVolume) -> tuple[float, float]:
    return float(volume.voxels.min()), float(volume.voxels.max())


def _mr_slice(slice_2d: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi <= lo:
        gray = np.zeros(slice_2d.shape, dtype=np.uint8)
    else:
        gray = _kernels.window_to_u8(np.asarray(slice_2d, dtype=np.float64), lo, hi)
    return np.repeat(gray[..., None], 3, axis=-1)


def normalize_mr_volume(volume: VoxelVolume) -> np.ndarray:
    """Min-max normalize an MR volume globally; returns ``(n, H, W, 3)`` gray RGB.

    A constant volume maps to zeros and raises a ``DegenerateVolumeWarning``.
    """
    if volume.modality is not Modality.MR:
        raise ValidationError(f"{volume.series_id}: normalize_mr_volume needs an MR volume")
    lo, hi = _mr_range(volume)
    if hi <= lo:
        warnings.warn(
            f"{volume.series_id}: constant MR volume (value {lo}), emitting zeros",
            DegenerateVolumeWarning,
            stacklevel=2,
        )
    return np.stack([_mr_slice(s, lo, hi) for s in volume.voxels])


def rejection_reasons(volume: VoxelVolume, criteria: StackCriteria) -> list[str]:
    reasons = []
    w, h, n = volume.dims
    m = criteria.max_slice_px
    if w > m or h > m:
        reasons.append(f"max {m}×{m}")
    if volume.orientation is not criteria.required_orientation:
        reasons.append(f"{criteria.required_orientation.value.lower()} orientation")
    if criteria.uniform_thickness:
        t = volume.slice_thickness_mm
        if max(t) - min(t) > criteria.thickness_tol_mm:
            reasons.append("uniform slice thickness")
    if n < criteria.min_slices:
        reasons.append(f"min {criteria.min_slices} slices")
    return reasons


def filter_volumes(
    volumes: Sequence[VoxelVolume], criteria: StackCriteria | None = None
) -> tuple[list[VoxelVolume], list[tuple[VoxelVolume, list[str]]]]:
    criteria = criteria or StackCriteria()
    admitted, rejected = [], []
    for vol in volumes:
        reasons = rejection_reasons(vol, criteria)
        if reasons:
            rejected.append((vol, reasons))
        else:
            admitted.append(vol)
    return admitted, rejected


def zstack(admitted: Sequence[VoxelVolume]) -> list[tuple[str, int]]:
    """Concatenate slices of all volumes: series ids ascending, then z ascending."""
    ids = [v.series_id for v in admitted]
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise ValidationError(f"duplicate series_id: {', '.join(dupes)}")
    order = sorted(admitted, key=lambda v: v.series_id)
    return [(v.series_id, z) for v in order for z in range(v.n_slices)]


def sample_equidistant(n_total: int, cap: int = DEFAULT_CAP) -> list[int]:
    if n_total < 1:
        raise ValueError(f"n_total must be >= 1, got {n_total}")
    if cap < 2:
        raise ValueError(f"cap must be >= 2, got {cap}")
    if n_total <= cap:
        return list(range(n_total))
    return [k * (n_total - 1) // (cap - 1) for k in range(cap)]


def vision_token_count(n_images: int) -> int:
    if n_images < 0:
        raise ValueError("n_images must be >= 0")
    return TOKENS_PER_IMAGE * n_images


def render_sequence(
    volumes: Sequence[VoxelVolume],
    criteria: StackCriteria | None = None,
    windows: Sequence[WindowSpec] = CT_WINDOWS,
    cap: int = DEFAULT_CAP,
    size: int = IMAGE_SIZE,
) -> SliceSequence:
    """Run filter, z-stack, equidistant sampling, value mapping and resize."""
    admitted, rejected = filter_volumes(volumes, criteria)
    if not admitted:
        raise NoAdmissibleVolumes([(v.series_id, r) for v, r in rejected])
    for vol, reasons in rejected:
        logger.info("skipping %s: %s", vol.series_id, ", ".join(reasons))

    modalities = {v.modality for v in admitted}
    if len(modalities) > 1:
        raise ValidationError("cannot stack CT and MR volumes into one sequence")
    modality = modalities.pop()

    by_id = {v.series_id: v for v in admitted}
    stacked = zstack(admitted)
    chosen = sample_equidistant(len(stacked), cap)

    notes: list[str] = []
    mr_ranges = {}
    if modality is Modality.MR:
        for sid, vol in by_id.items():
            lo, hi = _mr_range(vol)
            if hi <= lo:
                msg = f"{sid}: constant MR volume (value {lo}), emitting zeros"
                warnings.warn(msg, DegenerateVolumeWarning, stacklevel=2)
                notes.append(msg)
            mr_ranges[sid] = (lo, hi)

    entries = []
    for g in chosen:
        sid, z = stacked[g]
        raw = by_id[sid].voxels[z]
        if modality is Modality.CT:
            rgb = window_ct_slice(raw, windows)
        else:
            rgb = _mr_slice(raw, *mr_ranges[sid])
        if rgb.shape[:2] != (size, size):
            rgb = _kernels.resize_bilinear_u8(rgb, size, size)
        entries.append(SliceEntry(global_index=g, image=rgb, series_id=sid, z=z))

    return SliceSequence(
        entries=entries,
        modality=modality,
        source_series=sorted(by_id),
        cap=cap,
        warnings=notes,
    )
