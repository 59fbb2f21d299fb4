"""
Core types for synthetic data generation.

Enums name the vocabulary; frozen dataclasses are the runtime values.
Category entries are loaded from ``data/categories.yaml`` by the registry
and never written after startup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType

import numpy as np

from posedistill.posemath import EulerPose

# ── Enums ──────────────────────────────────────────────────────────────────────


class ShapeCategory(str, Enum):
    BOX = "box"
    CYLINDER = "cylinder"
    CONE = "cone"
    ELLIPSOID = "ellipsoid"
    LSHAPE = "lshape"
    TSHAPE = "tshape"


class SplitMode(str, Enum):
    """Seen/unseen category protocols."""

    FULLY_SUPERVISED = "fully_supervised"  # every category in train and val
    ZERO_SHOT = "zero_shot"  # unseen categories only in val
    FEW_SHOT = "few_shot"  # k train samples per unseen category


# Parameter names each category's table entry must declare, in order.
REQUIRED_PARAMS: MappingProxyType[ShapeCategory, tuple[str, ...]] = MappingProxyType(
    {
        ShapeCategory.BOX: ("half_x", "half_y", "half_z"),
        ShapeCategory.CYLINDER: ("radius", "half_height"),
        ShapeCategory.CONE: ("radius", "half_height"),
        ShapeCategory.ELLIPSOID: ("semi_x", "semi_y", "semi_z"),
        ShapeCategory.LSHAPE: ("arm", "half_width", "half_depth"),
        ShapeCategory.TSHAPE: ("arm", "half_width", "half_depth"),
    }
)


# ── Registry entry types ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class ParamRange:
    name: str
    min: float
    max: float

    def contains(self, value: float) -> bool:
        return self.min <= value <= self.max


@dataclass(frozen=True)
class CategoryEntry:
    id: ShapeCategory
    description: str
    mirror_symmetric: bool
    params: tuple[ParamRange, ...]

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)


# ── Runtime values ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ShapeSpec:
    """
    One procedural shape instance.

    ``size_params`` are ordered as the category's REQUIRED_PARAMS. Range
    checks against the category table happen in ``make_shape_spec`` and
    ``validate_shape_spec``; the constructor checks only arity and sign.
    """

    category: ShapeCategory
    size_params: tuple[float, ...]
    instance_seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", ShapeCategory(self.category))
        expected = REQUIRED_PARAMS[self.category]
        if len(self.size_params) != len(expected):
            raise ValueError(
                f"{self.category.value} needs {len(expected)} size params {expected}, "
                f"got {len(self.size_params)}"
            )
        for name, val in zip(expected, self.size_params):
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val}")
        object.__setattr__(self, "size_params", tuple(float(v) for v in self.size_params))

    def param(self, name: str) -> float:
        return self.size_params[REQUIRED_PARAMS[self.category].index(name)]

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(REQUIRED_PARAMS[self.category], self.size_params))


@dataclass(frozen=True)
class PoseRanges:
    """Closed sampling intervals (radians) for generated poses."""

    azimuth: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    elevation: tuple[float, float] = (-math.pi / 6, math.pi / 3)
    inplane: tuple[float, float] = (-math.pi / 6, math.pi / 6)

    def __post_init__(self) -> None:
        for name, (lo, hi) in (
            ("azimuth", self.azimuth),
            ("elevation", self.elevation),
            ("inplane", self.inplane),
        ):
            if hi < lo:
                raise ValueError(f"{name} range must satisfy lo <= hi, got ({lo}, {hi})")
        if self.elevation[0] < -math.pi / 2 or self.elevation[1] > math.pi / 2:
            raise ValueError(f"elevation range must lie in [-π/2, π/2], got {self.elevation}")
        for name, (lo, hi) in (("azimuth", self.azimuth), ("inplane", self.inplane)):
            if lo < -math.pi or hi > math.pi:
                raise ValueError(f"{name} range must lie in [-π, π], got ({lo}, {hi})")

    def sample(self, rng: np.random.Generator) -> EulerPose:
        return EulerPose(
            rng.uniform(*self.azimuth),
            rng.uniform(*self.elevation),
            rng.uniform(*self.inplane),
        )


@dataclass(frozen=True)
class Sample:
    """One record: noisy render, canonical cloud, pose and category."""

    image: np.ndarray  # (H, W) float32 in [0, 1]
    cloud: np.ndarray  # (N, 3) float32, canonical frame
    pose: EulerPose
    category: ShapeCategory
    instance_seed: int
    noise_std: float = 0.0


# ── Datasets ──────────────────────────────────────────────────────────────────


def category_id(category: ShapeCategory | str) -> int:
    """Stable on-disk id: the category's position in ShapeCategory."""
    return list(ShapeCategory).index(ShapeCategory(category))


def category_from_id(cid: int) -> ShapeCategory:
    members = list(ShapeCategory)
    if not 0 <= cid < len(members):
        raise ValueError(f"category id must be in [0, {len(members)}), got {cid}")
    return members[cid]


@dataclass(frozen=True)
class DatasetSplit:
    """
    Seen/unseen category protocol plus the resulting index lists.

    ``train`` and ``val`` are sorted, disjoint int64 index arrays into the
    owning dataset. ``k`` is set only in few-shot mode.
    """

    mode: SplitMode
    seen: tuple[ShapeCategory, ...]
    unseen: tuple[ShapeCategory, ...]
    train: np.ndarray
    val: np.ndarray
    k: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SplitMode(self.mode))
        for name in ("train", "val"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.intersect1d(self.train, self.val).size:
            raise ValueError("train and val indices must be disjoint")
        if self.mode is SplitMode.FEW_SHOT and self.k is None:
            raise ValueError("few_shot split needs k")

    def indices(self, which: str) -> np.ndarray:
        """Index array for ``"train"``, ``"val"`` or ``"all"``."""
        if which == "train":
            return self.train
        if which == "val":
            return self.val
        if which == "all":
            return np.union1d(self.train, self.val)
        raise ValueError(f"split must be 'train', 'val' or 'all', got {which!r}")


@dataclass(frozen=True)
class Dataset:
    """
    In-memory dataset: parallel per-sample arrays plus the split.

    images (S, H, W) float32 · clouds (S, N, 3) float32 · poses (S, 3)
    float64 radians · categories (S,) uint16 ids · instance_seeds (S,) int64.
    """

    images: np.ndarray
    clouds: np.ndarray
    poses: np.ndarray
    categories: np.ndarray
    instance_seeds: np.ndarray
    split: DatasetSplit
    category_names: tuple[ShapeCategory, ...]
    master_seed: int
    noise_std: float
    pose_ranges: PoseRanges = PoseRanges()

    def __post_init__(self) -> None:
        s = self.images.shape[0]
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise ValueError(f"images must be (S, H, H), got {self.images.shape}")
        if self.clouds.ndim != 3 or self.clouds.shape[2] != 3:
            raise ValueError(f"clouds must be (S, N, 3), got {self.clouds.shape}")
        for name in ("clouds", "poses", "categories", "instance_seeds"):
            if getattr(self, name).shape[0] != s:
                raise ValueError(f"{name} must have {s} rows, got {getattr(self, name).shape[0]}")
        if self.poses.shape[1:] != (3,):
            raise ValueError(f"poses must be (S, 3), got {self.poses.shape}")

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def resolution(self) -> int:
        return int(self.images.shape[1])

    @property
    def n_points(self) -> int:
        return int(self.clouds.shape[1])

    def category(self, index: int) -> ShapeCategory:
        return category_from_id(int(self.categories[index]))

    def pose(self, index: int) -> EulerPose:
        return EulerPose.from_array(self.poses[index])

    def sample(self, index: int) -> Sample:
        return Sample(
            image=self.images[index],
            cloud=self.clouds[index],
            pose=self.pose(index),
            category=self.category(index),
            instance_seed=int(self.instance_seeds[index]),
            noise_std=self.noise_std,
        )

    def indices(self, which: str) -> np.ndarray:
        return self.split.indices(which)

    def per_category_counts(self) -> dict[str, int]:
        return {
            cat.value: int(np.count_nonzero(self.categories == category_id(cat)))
            for cat in self.category_names
        }
