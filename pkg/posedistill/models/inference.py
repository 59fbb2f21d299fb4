"""Batched eval-mode prediction and pose decoding."""

from __future__ import annotations

from enum import Enum

import numpy as np

from posedistill.posemath import PosePrediction, decode_pose

from .networks import ModelBundle, PoseHeadOutputs

DEFAULT_BATCH = 256


class Role(str, Enum):
    """Which network of a bundle produces predictions."""

    TEACHER = "teacher"
    STUDENT = "student"


def head_predictions(heads: PoseHeadOutputs) -> list[PosePrediction]:
    """Split batched head outputs into one PosePrediction per row."""
    logits = [t.value for t in heads.logits]
    offsets = [t.value for t in heads.offsets]
    return [
        PosePrediction(
            bin_scores=(logits[0][i], logits[1][i], logits[2][i]),
            offsets=(offsets[0][i], offsets[1][i], offsets[2][i]),
        )
        for i in range(logits[0].shape[0])
    ]


def predict_poses(
    bundle: ModelBundle,
    images: np.ndarray,
    clouds: np.ndarray | None = None,
    *,
    role: Role | str = Role.STUDENT,
    batch_size: int = DEFAULT_BATCH,
) -> np.ndarray:
    """
    Decoded (α, β, γ) predictions, shape (B, 3), from an eval-mode forward.

    The teacher needs the point clouds; the student reads images only.
    Results do not depend on *batch_size*: no op mixes rows in eval mode.
    """
    role = Role(role)
    if role is Role.TEACHER and clouds is None:
        raise ValueError("teacher predictions need point clouds")
    params = bundle.bind(None)
    out = np.empty((len(images), 3), dtype=np.float64)
    for start in range(0, len(images), batch_size):
        stop = min(start + batch_size, len(images))
        if role is Role.TEACHER:
            assert clouds is not None
            heads = bundle.teacher_forward(params, images[start:stop], clouds[start:stop]).heads
        else:
            heads = bundle.student_forward(params, images[start:stop]).heads
        for i, pred in enumerate(head_predictions(heads)):
            out[start + i] = decode_pose(pred, bundle.config.bin_spec).as_array()
    return out
