"""
Label-consistent image augmentation for training batches.

A horizontal flip maps the pose through augment_flip and an in-plane
rotation by φ through augment_rotate. The point cloud lives in the
canonical object frame and is never touched.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from posedistill.datagen import (
    Dataset,
    Sample,
    flip_image,
    make_shape_spec,
    render,
    rotate_image,
)
from posedistill.posemath import augment_flip, augment_rotate

from .config import AugmentMode, TrainConfig


def apply_augmentation(
    sample: Sample,
    rng: np.random.Generator,
    config: TrainConfig,
    *,
    flip: bool | None = None,
    phi: float | None = None,
) -> Sample:
    """
    Randomly flip and rotate *sample*, keeping image and pose consistent.

    Two draws are taken from *rng* on every call (flip, then φ), so the
    stream advances identically whether or not the overrides are used.
    *flip* and *phi* (radians) override the drawn values; *phi* is not
    limited to the configured range.
    """
    drawn_flip = bool(rng.random() < config.flip_prob)
    drawn_phi = float(rng.uniform(-config.rotation_rad, config.rotation_rad))
    do_flip = drawn_flip if flip is None else flip
    angle = drawn_phi if phi is None else phi
    if not do_flip and angle == 0.0:
        return sample

    pose = augment_flip(sample.pose) if do_flip else sample.pose
    pose = augment_rotate(pose, angle)

    if config.augment_mode is AugmentMode.RERENDER:
        spec = make_shape_spec(sample.category, sample.instance_seed)
        image = render(
            spec, pose, sample.image.shape[0], noise_std=sample.noise_std, rng=rng
        ).astype(sample.image.dtype)
    else:
        image = flip_image(sample.image) if do_flip else sample.image
        image = rotate_image(image, angle)
    return dataclasses.replace(sample, image=image, pose=pose)


def augmented_batch(
    dataset: Dataset, indices: np.ndarray, rng: np.random.Generator, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Augmented (images, poses) for *indices*, in order."""
    images = np.empty((len(indices), dataset.resolution, dataset.resolution), dtype=np.float32)
    poses = np.empty((len(indices), 3), dtype=np.float64)
    for row, index in enumerate(indices):
        sample = apply_augmentation(dataset.sample(int(index)), rng, config)
        images[row] = sample.image
        poses[row] = sample.pose.as_array()
    return images, poses
