"""
Evaluation reports: overall and per-category Acc30 / MedErr.

``metrics.json`` holds one MetricsReport. The overall Acc30 is computed
over all errors at once, which equals the sample-weighted mean of the
per-category values.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from posedistill.datagen import Dataset, category_id
from posedistill.models import ModelBundle, Role, predict_poses
from posedistill.posemath import EmptyEvaluationError, EulerPose, acc30, mederr, pose_error_deg

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.json"


@dataclass(frozen=True)
class CategoryMetrics:
    category: str
    count: int
    acc30: float
    mederr: float


@dataclass(frozen=True)
class MetricsReport:
    """Acc30 / MedErr over one split, overall and per category, with provenance."""

    acc30: float
    mederr: float
    count: int
    categories: tuple[CategoryMetrics, ...]
    split: str = "val"
    role: str = Role.STUDENT.value
    strategy: str = ""
    seed: int = 0
    config_hash: str = ""

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["categories"] = [asdict(c) for c in self.categories]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MetricsReport:
        return cls(
            **{
                **data,
                "categories": tuple(CategoryMetrics(**c) for c in data["categories"]),
            }
        )

    def write(self, path: str | Path) -> Path:
        """Write to *path*, or to ``<path>/metrics.json`` when *path* is a directory."""
        p = Path(path)
        if p.is_dir():
            p = p / METRICS_NAME
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return p

    @classmethod
    def read(cls, path: str | Path) -> MetricsReport:
        p = Path(path)
        if p.is_dir():
            p = p / METRICS_NAME
        return cls.from_dict(json.loads(p.read_text()))

    def category(self, name: str) -> CategoryMetrics:
        for row in self.categories:
            if row.category == name:
                return row
        raise KeyError(f"no category {name!r} in report")


def report_from_predictions(
    dataset: Dataset,
    indices: np.ndarray,
    predictions: np.ndarray,
    *,
    split: str = "val",
    role: Role | str = Role.STUDENT,
    strategy: str = "",
    seed: int = 0,
    config_hash: str = "",
) -> MetricsReport:
    """
    Score (B, 3) predicted poses against the ground truth of *indices*.

    Categories without samples in *indices* are left out of the breakdown.

    Raises
    ------
    EmptyEvaluationError
        If *indices* is empty.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptyEvaluationError(f"split {split!r} has no samples to evaluate")
    errors = np.array(
        [
            pose_error_deg(EulerPose.from_array(predictions[row]), dataset.pose(int(i)))
            for row, i in enumerate(idx)
        ],
        dtype=np.float64,
    )
    cats = dataset.categories[idx]
    rows = []
    for cat in dataset.category_names:
        mask = cats == category_id(cat)
        if mask.any():
            rows.append(
                CategoryMetrics(
                    category=cat.value,
                    count=int(mask.sum()),
                    acc30=acc30(errors[mask]),
                    mederr=mederr(errors[mask]),
                )
            )
    return MetricsReport(
        acc30=acc30(errors),
        mederr=mederr(errors),
        count=int(idx.size),
        categories=tuple(rows),
        split=split,
        role=Role(role).value,
        strategy=strategy,
        seed=seed,
        config_hash=config_hash,
    )


def evaluate(
    bundle: ModelBundle,
    dataset: Dataset,
    split: str | np.ndarray = "val",
    *,
    role: Role | str = Role.STUDENT,
    strategy: str = "",
    seed: int = 0,
    config_hash: str = "",
) -> MetricsReport:
    """
    Predict poses for a split and score them.

    Any dataset whose resolution and point count match the bundle's topology
    can be evaluated, so a model trained on one generated benchmark can be
    scored on another. The bundle is only read.

    *split* is ``"train"``, ``"val"``, ``"all"`` or an explicit index array.

    Raises
    ------
    CheckpointError
        If the dataset does not match the model's input sizes.
    EmptyEvaluationError
        If the split is empty.
    """
    bundle.check_compatible(dataset.resolution, dataset.n_points)
    if isinstance(split, str):
        name, idx = split, dataset.indices(split)
    else:
        name, idx = "custom", np.asarray(split, dtype=np.int64)
    if idx.size == 0:
        raise EmptyEvaluationError(f"split {name!r} has no samples to evaluate")
    preds = predict_poses(bundle, dataset.images[idx], dataset.clouds[idx], role=role)
    report = report_from_predictions(
        dataset,
        idx,
        preds,
        split=name,
        role=role,
        strategy=strategy,
        seed=seed,
        config_hash=config_hash,
    )
    logger.info(
        "evaluated %d %s samples (%s): acc30=%.3f mederr=%.1f°",
        report.count,
        name,
        report.role,
        report.acc30,
        report.mederr,
    )
    return report
