"""Side-by-side renders of ground-truth and predicted poses as binary PGM files."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from posedistill.datagen import Dataset, render, sample_shape
from posedistill.errors import ConfigError, DatasetIOError
from posedistill.models import ModelBundle, Role, predict_poses
from posedistill.posemath import EulerPose

logger = logging.getLogger(__name__)

KINDS = ("input", "gt", "pred")


def to_gray8(img: np.ndarray) -> np.ndarray:
    """Map a [0, 1] image to uint8 gray levels."""
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(img: np.ndarray, path: str | Path) -> Path:
    p = Path(path)
    try:
        # uint8 (H, W) is mode "L", which the PPM writer stores as binary P5
        Image.fromarray(to_gray8(img)).save(p, format="PPM")
    except OSError as exc:
        raise DatasetIOError(f"cannot write {p}: {exc}") from exc
    return p


def visualize(
    bundle: ModelBundle,
    dataset: Dataset,
    n: int,
    out_dir: str | Path,
    *,
    indices: np.ndarray | None = None,
    role: Role | str = Role.STUDENT,
    predictions: np.ndarray | None = None,
) -> list[Path]:
    """
    Write ``<index>_input.pgm``, ``<index>_gt.pgm`` and ``<index>_pred.pgm``
    for the first *n* samples of *indices* (default: the validation split).

    The ground-truth and predicted views are noise-free renders of the
    sample's own procedural shape, so a perfect prediction gives two
    identical files. *predictions* ((len(indices), 3) radians) bypasses the
    model.

    Raises
    ------
    ConfigError
        If n < 0.
    DatasetIOError
        If a file cannot be written.
    """
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    idx = np.asarray(indices if indices is not None else dataset.split.val, dtype=np.int64)[:n]
    if idx.size == 0:
        return []
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"cannot create {out}: {exc}") from exc

    if predictions is None:
        bundle.check_compatible(dataset.resolution, dataset.n_points)
        preds = predict_poses(bundle, dataset.images[idx], dataset.clouds[idx], role=role)
    else:
        preds = np.asarray(predictions, dtype=np.float64)[: idx.size]

    written: list[Path] = []
    for row, i in enumerate(idx):
        spec = sample_shape(dataset, int(i))
        views = {
            "input": dataset.images[i],
            "gt": render(spec, dataset.pose(int(i)), dataset.resolution),
            "pred": render(spec, EulerPose.from_array(preds[row]), dataset.resolution),
        }
        for kind in KINDS:
            written.append(write_pgm(views[kind], out / f"{int(i)}_{kind}.pgm"))
    logger.info("wrote %d views of %d samples to %s", len(written), idx.size, out)
    return written
