"""Whole-slide image tiling into capped, order-preserving patch sets."""
from .core import (
    DEFAULT_CAP,
    MASK_MAGNIFICATION,
    PATCH_SIZE,
    MagnificationDistribution,
    MaskParams,
    Patch,
    PatchSet,
    SlideLevel,
    SlidePyramid,
    TissueMask,
    choose_magnification,
    extract_patches,
    grid_candidates,
    grid_shape,
    process_slide,
    subsample_indices,
    subsample_patches,
    tissue_mask,
)
from .io import load_slide_dir, patch_relpath, write_patchset, write_slide_dir

__all__ = [
    "DEFAULT_CAP",
    "MASK_MAGNIFICATION",
    "PATCH_SIZE",
    "MagnificationDistribution",
    "MaskParams",
    "Patch",
    "PatchSet",
    "SlideLevel",
    "SlidePyramid",
    "TissueMask",
    "choose_magnification",
    "extract_patches",
    "grid_candidates",
    "grid_shape",
    "load_slide_dir",
    "patch_relpath",
    "process_slide",
    "subsample_indices",
    "subsample_patches",
    "tissue_mask",
    "write_patchset",
    "write_slide_dir",
]
