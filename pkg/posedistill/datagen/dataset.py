"""
Dataset generation: configuration, per-sample synthesis, and splits.

Sample *i* is a pure function of (master_seed, i): its generator is seeded
with ``SeedSequence([master_seed, i])``, which draws the instance seed, the
pose, and the pixel noise in that order. Generation can therefore fan out
over worker processes without changing a single byte of the result.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from posedistill.errors import ConfigError

from .registry import get_registry
from .render import MIN_RESOLUTION, render
from .shapes import MIN_POINTS, make_shape_spec, sample_point_cloud
from .storage import read_manifest, write_dataset
from .types import (
    Dataset,
    DatasetSplit,
    PoseRanges,
    ShapeCategory,
    ShapeSpec,
    SplitMode,
    category_id,
)

logger = logging.getLogger(__name__)

_SPLIT_STREAM = 1
_INSTANCE_SEED_BOUND = 2**31


@dataclass(frozen=True)
class DatasetConfig:
    """Everything that determines a generated dataset's content."""

    categories: tuple[ShapeCategory, ...] = tuple(ShapeCategory)
    samples_per_category: int = 400
    resolution: int = 32
    n_points: int = 256
    noise_std: float = 0.05
    split_mode: SplitMode = SplitMode.FULLY_SUPERVISED
    unseen_categories: tuple[ShapeCategory, ...] = ()
    few_shot_k: int = 10
    val_fraction: float = 0.2
    master_seed: int = 0
    pose_ranges: PoseRanges = field(default_factory=PoseRanges)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "categories", tuple(ShapeCategory(c) for c in self.categories))
            object.__setattr__(
                self, "unseen_categories", tuple(ShapeCategory(c) for c in self.unseen_categories)
            )
            object.__setattr__(self, "split_mode", SplitMode(self.split_mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        if not self.categories:
            raise ConfigError("categories must not be empty")
        if len(set(self.categories)) != len(self.categories):
            raise ConfigError(f"categories must be distinct, got {[c.value for c in self.categories]}")
        if self.samples_per_category < 1:
            raise ConfigError(f"samples_per_category must be >= 1, got {self.samples_per_category}")
        if self.resolution < MIN_RESOLUTION:
            raise ConfigError(f"resolution must be >= {MIN_RESOLUTION}, got {self.resolution}")
        if self.n_points < MIN_POINTS:
            raise ConfigError(f"n_points must be >= {MIN_POINTS}, got {self.n_points}")
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")
        self._check_split()

    def _check_split(self) -> None:
        unseen = set(self.unseen_categories)
        if not unseen <= set(self.categories):
            extra = sorted(c.value for c in unseen - set(self.categories))
            raise ConfigError(f"unseen_categories {extra} are not among the dataset categories")
        if self.split_mode is SplitMode.FULLY_SUPERVISED:
            if unseen:
                raise ConfigError("fully_supervised split must not name unseen_categories")
            return
        if not unseen:
            raise ConfigError(f"{self.split_mode.value} split needs at least one unseen category")
        if unseen == set(self.categories):
            raise ConfigError(f"{self.split_mode.value} split needs at least one seen category")
        if self.split_mode is SplitMode.FEW_SHOT and not (
            0 <= self.few_shot_k < self.samples_per_category
        ):
            raise ConfigError(
                f"few_shot_k must be in [0, {self.samples_per_category}), got {self.few_shot_k}"
            )

    @property
    def total_samples(self) -> int:
        return len(self.categories) * self.samples_per_category

    @property
    def seen_categories(self) -> tuple[ShapeCategory, ...]:
        return tuple(c for c in self.categories if c not in self.unseen_categories)


@dataclass(frozen=True)
class DatasetSummary:
    path: Path
    count: int
    per_category: dict[str, int]
    train: int
    val: int
    crc32: int


# ── Synthesis ─────────────────────────────────────────────────────────────────


def _synthesize(
    config: DatasetConfig, index: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, index]))
    category = config.categories[index // config.samples_per_category]
    instance_seed = int(rng.integers(0, _INSTANCE_SEED_BOUND))
    spec = make_shape_spec(category, instance_seed)
    pose = config.pose_ranges.sample(rng)
    cloud = sample_point_cloud(spec, config.n_points)
    image = render(spec, pose, config.resolution, noise_std=config.noise_std, rng=rng)
    return (
        image.astype(np.float32),
        cloud.astype(np.float32),
        pose.as_array(),
        category_id(category),
        instance_seed,
    )


def make_split(config: DatasetConfig, categories: np.ndarray) -> DatasetSplit:
    """
    Partition sample indices into train and val for the configured protocol.

    Seen categories send round(val_fraction·n) randomly chosen samples to
    val. Zero-shot puts every unseen sample in val; few-shot puts exactly
    k of them in train and the rest in val.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(config.master_seed, spawn_key=(_SPLIT_STREAM,))
    )
    unseen = set(config.unseen_categories)
    train: list[np.ndarray] = []
    val: list[np.ndarray] = []
    for cat in config.categories:
        members = rng.permutation(np.flatnonzero(categories == category_id(cat)))
        if cat in unseen and config.split_mode is SplitMode.ZERO_SHOT:
            val.append(members)
        elif cat in unseen and config.split_mode is SplitMode.FEW_SHOT:
            train.append(members[: config.few_shot_k])
            val.append(members[config.few_shot_k :])
        else:
            n_val = int(round(config.val_fraction * members.size))
            val.append(members[:n_val])
            train.append(members[n_val:])
    return DatasetSplit(
        mode=config.split_mode,
        seen=config.seen_categories,
        unseen=config.unseen_categories,
        train=np.sort(np.concatenate(train)) if train else np.empty(0, dtype=np.int64),
        val=np.sort(np.concatenate(val)) if val else np.empty(0, dtype=np.int64),
        k=config.few_shot_k if config.split_mode is SplitMode.FEW_SHOT else None,
    )


def build_dataset(config: DatasetConfig, workers: int = 1) -> Dataset:
    """Synthesize the whole dataset in memory. Output is independent of *workers*."""
    get_registry()  # fail on a broken category table before forking
    indices = range(config.total_samples)
    job = partial(_synthesize, config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, indices, chunksize=32))
    else:
        rows = [job(i) for i in indices]

    images, clouds, poses, cats, seeds = zip(*rows)
    categories = np.array(cats, dtype=np.uint16)
    dataset = Dataset(
        images=np.stack(images),
        clouds=np.stack(clouds),
        poses=np.stack(poses),
        categories=categories,
        instance_seeds=np.array(seeds, dtype=np.int64),
        split=make_split(config, categories),
        category_names=config.categories,
        master_seed=config.master_seed,
        noise_std=config.noise_std,
        pose_ranges=config.pose_ranges,
    )
    logger.info(
        "built %d samples over %d categories (%d train / %d val)",
        len(dataset),
        len(config.categories),
        dataset.split.train.size,
        dataset.split.val.size,
    )
    return dataset


def generate_dataset(
    config: DatasetConfig, out_dir: str | Path, workers: int = 1
) -> DatasetSummary:
    """Build the dataset and write it to *out_dir*; returns summary counts."""
    dataset = build_dataset(config, workers=workers)
    path = write_dataset(dataset, out_dir)
    return DatasetSummary(
        path=path,
        count=len(dataset),
        per_category=dataset.per_category_counts(),
        train=int(dataset.split.train.size),
        val=int(dataset.split.val.size),
        crc32=int(read_manifest(path)["crc32"]),
    )


def sample_shape(dataset: Dataset, index: int) -> ShapeSpec:
    """Rebuild the procedural shape behind sample *index* from its stored seed."""
    return make_shape_spec(dataset.category(index), int(dataset.instance_seeds[index]))
