"""
Dataset directory format.

``samples.bin``
    the 8-byte magic ``PDSAMP01`` followed by one fixed-size record per
    sample, in manifest order. Each record is little-endian and packed:
    float32 image (H·W) · float32 cloud (N·3) · float64 pose (3) · uint16
    category id.
``manifest.json``
    format tag and version, sample count, resolution, point count, category
    list and per-category counts, the split (mode, seen, unseen, k, train
    and val index lists), master seed, noise level, pose ranges, per-sample
    instance seeds, and the CRC32 of the whole ``samples.bin``.
"""

from __future__ import annotations

import json
import logging
import zlib
from pathlib import Path
from typing import Any

import numpy as np

from posedistill.errors import DatasetFormatError, DatasetIOError

from .types import (
    Dataset,
    DatasetSplit,
    PoseRanges,
    ShapeCategory,
    SplitMode,
    category_from_id,
    category_id,
)

logger = logging.getLogger(__name__)

FORMAT_TAG = "posedistill-dataset"
FORMAT_VERSION = 1
MAGIC = b"PDSAMP01"
MANIFEST_NAME = "manifest.json"
SAMPLES_NAME = "samples.bin"


class DatasetTruncatedError(DatasetFormatError):
    """samples.bin holds fewer records than the manifest declares."""


class DatasetChecksumError(DatasetFormatError):
    """samples.bin does not match the CRC32 recorded in the manifest."""


def record_dtype(resolution: int, n_points: int) -> np.dtype:
    return np.dtype(
        [
            ("image", "<f4", (resolution * resolution,)),
            ("cloud", "<f4", (n_points * 3,)),
            ("pose", "<f8", (3,)),
            ("category", "<u2"),
        ]
    )


# ── Writing ───────────────────────────────────────────────────────────────────


def write_dataset(dataset: Dataset, directory: str | Path) -> Path:
    """Write *dataset* into *directory* (created if needed); returns the directory."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"cannot create dataset directory {out}: {exc}") from exc

    count, res, n = len(dataset), dataset.resolution, dataset.n_points
    records = np.zeros(count, dtype=record_dtype(res, n))
    records["image"] = dataset.images.reshape(count, res * res)
    records["cloud"] = dataset.clouds.reshape(count, n * 3)
    records["pose"] = dataset.poses
    records["category"] = dataset.categories
    blob = MAGIC + records.tobytes()

    split = dataset.split
    manifest: dict[str, Any] = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "count": count,
        "resolution": res,
        "n_points": n,
        "categories": [c.value for c in dataset.category_names],
        "per_category": dataset.per_category_counts(),
        "split": {
            "mode": split.mode.value,
            "seen": [c.value for c in split.seen],
            "unseen": [c.value for c in split.unseen],
            "k": split.k,
            "train": split.train.tolist(),
            "val": split.val.tolist(),
        },
        "master_seed": dataset.master_seed,
        "noise_std": dataset.noise_std,
        "pose_ranges": {
            "azimuth": list(dataset.pose_ranges.azimuth),
            "elevation": list(dataset.pose_ranges.elevation),
            "inplane": list(dataset.pose_ranges.inplane),
        },
        "instance_seeds": dataset.instance_seeds.tolist(),
        "crc32": zlib.crc32(blob),
    }
    try:
        (out / SAMPLES_NAME).write_bytes(blob)
        (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1) + "\n")
    except OSError as exc:
        raise DatasetIOError(f"cannot write dataset to {out}: {exc}") from exc
    logger.info("wrote %d samples (%d bytes) to %s", count, len(blob), out)
    return out


# ── Reading ───────────────────────────────────────────────────────────────────


def read_manifest(directory: str | Path) -> dict[str, Any]:
    """Load and sanity-check ``manifest.json`` without touching the blob."""
    path = Path(directory) / MANIFEST_NAME
    try:
        manifest: dict[str, Any] = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DatasetIOError(f"no dataset at {Path(directory)} ({MANIFEST_NAME} missing)") from exc
    except OSError as exc:
        raise DatasetIOError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"malformed manifest {path}: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT_TAG:
        raise DatasetFormatError(f"{path}: not a {FORMAT_TAG} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported version {manifest.get('version')!r}, expected {FORMAT_VERSION}"
        )
    missing = [
        key
        for key in ("count", "resolution", "n_points", "categories", "split", "master_seed",
                    "noise_std", "instance_seeds", "crc32")
        if key not in manifest
    ]
    if missing:
        raise DatasetFormatError(f"{path}: missing field(s) {missing}")
    return manifest


def read_dataset(directory: str | Path) -> Dataset:
    """
    Load a dataset directory written by write_dataset.

    Raises
    ------
    DatasetIOError
        If the directory or one of its files is missing or unreadable.
    DatasetFormatError
        On a malformed manifest or bad magic bytes.
    DatasetTruncatedError
        If samples.bin is shorter than the manifest's count implies.
    DatasetChecksumError
        If samples.bin fails its CRC32.
    """
    src = Path(directory)
    manifest = read_manifest(src)
    blob_path = src / SAMPLES_NAME
    try:
        blob = blob_path.read_bytes()
    except FileNotFoundError as exc:
        raise DatasetIOError(f"{src}: {SAMPLES_NAME} missing") from exc
    except OSError as exc:
        raise DatasetIOError(f"cannot read {blob_path}: {exc}") from exc

    if blob[: len(MAGIC)] != MAGIC:
        raise DatasetFormatError(f"{blob_path}: bad magic {blob[: len(MAGIC)]!r}")
    count, res, n = int(manifest["count"]), int(manifest["resolution"]), int(manifest["n_points"])
    dtype = record_dtype(res, n)
    expected = len(MAGIC) + count * dtype.itemsize
    if len(blob) < expected:
        raise DatasetTruncatedError(
            f"{blob_path}: manifest declares {count} samples ({expected} bytes), "
            f"file has {len(blob)} bytes"
        )
    if len(blob) > expected:
        raise DatasetFormatError(f"{blob_path}: {len(blob) - expected} trailing bytes")
    if zlib.crc32(blob) != int(manifest["crc32"]):
        raise DatasetChecksumError(f"{blob_path}: CRC32 mismatch")

    records = np.frombuffer(blob, dtype=dtype, count=count, offset=len(MAGIC))
    categories = records["category"].astype(np.uint16)
    try:
        names = tuple(ShapeCategory(c) for c in manifest["categories"])
        ids = {category_id(c) for c in names}
        for cid in np.unique(categories):
            if int(cid) not in ids:
                raise ValueError(f"record category {category_from_id(int(cid)).value} not listed")
        split = _split_from_manifest(manifest["split"], count)
        ranges = PoseRanges(**{k: tuple(v) for k, v in manifest.get("pose_ranges", {}).items()})
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetFormatError(f"{src / MANIFEST_NAME}: {exc}") from exc

    seeds = np.asarray(manifest["instance_seeds"], dtype=np.int64)
    if seeds.shape != (count,):
        raise DatasetFormatError(f"{src / MANIFEST_NAME}: expected {count} instance seeds")

    dataset = Dataset(
        images=records["image"].reshape(count, res, res).astype(np.float32),
        clouds=records["cloud"].reshape(count, n, 3).astype(np.float32),
        poses=records["pose"].astype(np.float64),
        categories=categories,
        instance_seeds=seeds,
        split=split,
        category_names=names,
        master_seed=int(manifest["master_seed"]),
        noise_std=float(manifest["noise_std"]),
        pose_ranges=ranges,
    )
    logger.debug("read %d samples from %s", count, src)
    return dataset


def _split_from_manifest(raw: dict[str, Any], count: int) -> DatasetSplit:
    train = np.asarray(raw["train"], dtype=np.int64)
    val = np.asarray(raw["val"], dtype=np.int64)
    for arr in (train, val):
        if arr.size and (arr.min() < 0 or arr.max() >= count):
            raise ValueError(f"split index outside [0, {count})")
    return DatasetSplit(
        mode=SplitMode(raw["mode"]),
        seen=tuple(ShapeCategory(c) for c in raw["seen"]),
        unseen=tuple(ShapeCategory(c) for c in raw["unseen"]),
        train=train,
        val=val,
        k=raw.get("k"),
    )
