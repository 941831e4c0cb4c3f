"""Volumetric CT/MR preprocessing into capped 896x896 RGB slice sequences."""
from .core import (
    CT_WINDOWS,
    DEFAULT_CAP,
    IMAGE_SIZE,
    TOKENS_PER_IMAGE,
    DegenerateVolumeWarning,
    Modality,
    Orientation,
    SliceEntry,
    SliceSequence,
    StackCriteria,
    VoxelVolume,
    WindowSpec,
    filter_volumes,
    normalize_mr_volume,
    rejection_reasons,
    render_sequence,
    sample_equidistant,
    vision_token_count,
    window_ct_slice,
    zstack,
)
from .io import decode_png, encode_png, read_study, read_volume, write_sequence, write_volume

__all__ = [
    "CT_WINDOWS",
    "DEFAULT_CAP",
    "IMAGE_SIZE",
    "TOKENS_PER_IMAGE",
    "DegenerateVolumeWarning",
    "Modality",
    "Orientation",
    "SliceEntry",
    "SliceSequence",
    "StackCriteria",
    "VoxelVolume",
    "WindowSpec",
    "decode_png",
    "encode_png",
    "filter_volumes",
    "normalize_mr_volume",
    "read_study",
    "read_volume",
    "rejection_reasons",
    "render_sequence",
    "sample_equidistant",
    "vision_token_count",
    "window_ct_slice",
    "write_sequence",
    "write_volume",
]
