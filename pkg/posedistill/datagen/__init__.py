"""
Synthetic pose data: procedural primitives, canonical point clouds,
orthographic depth renders, seen/unseen splits, and the on-disk format.
"""

from .dataset import (
    DatasetConfig,
    DatasetSummary,
    build_dataset,
    generate_dataset,
    make_split,
    sample_shape,
)
from .registry import CategoryRegistry, get_registry
from .render import DEFAULT_RESOLUTION, MIN_RESOLUTION, flip_image, render, rotate_image
from .shapes import (
    MIN_POINTS,
    first_hit,
    make_shape_spec,
    sample_point_cloud,
    surface_residual,
    validate_shape_spec,
)
from .storage import (
    DatasetChecksumError,
    DatasetTruncatedError,
    read_dataset,
    read_manifest,
    write_dataset,
)
from .types import (
    CategoryEntry,
    Dataset,
    DatasetSplit,
    ParamRange,
    PoseRanges,
    Sample,
    ShapeCategory,
    ShapeSpec,
    SplitMode,
    category_from_id,
    category_id,
)

__all__ = [
    # types
    "ShapeCategory",
    "SplitMode",
    "ParamRange",
    "CategoryEntry",
    "ShapeSpec",
    "PoseRanges",
    "Sample",
    "Dataset",
    "DatasetSplit",
    "category_id",
    "category_from_id",
    # registry
    "CategoryRegistry",
    "get_registry",
    # shapes
    "MIN_POINTS",
    "make_shape_spec",
    "validate_shape_spec",
    "sample_point_cloud",
    "surface_residual",
    "first_hit",
    # rendering
    "MIN_RESOLUTION",
    "DEFAULT_RESOLUTION",
    "render",
    "rotate_image",
    "flip_image",
    # generation
    "DatasetConfig",
    "DatasetSummary",
    "build_dataset",
    "generate_dataset",
    "make_split",
    "sample_shape",
    # storage
    "DatasetTruncatedError",
    "DatasetChecksumError",
    "read_dataset",
    "read_manifest",
    "write_dataset",
]
