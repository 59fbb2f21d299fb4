"""Pose, contrastive and distillation objectives, and the per-stage combinations."""

from .objectives import (
    EmbeddingMatch,
    LossBreakdown,
    LossWeights,
    PoseTargets,
    infonce,
    joint_loss,
    kl_embed,
    kl_output,
    pose_loss,
    student_loss,
    teacher_loss,
)

__all__ = [
    "LossWeights",
    "LossBreakdown",
    "EmbeddingMatch",
    "PoseTargets",
    "pose_loss",
    "infonce",
    "kl_embed",
    "kl_output",
    "teacher_loss",
    "student_loss",
    "joint_loss",
]
