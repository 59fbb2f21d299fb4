"""
Teacher, student and Contrastive Learner networks built from diffmath
primitives, plus batched inference.
"""

from .config import EncoderConfig
from .inference import Role, head_predictions, predict_poses
from .networks import (
    STUDENT_GROUPS,
    TEACHER_GROUPS,
    ModelBundle,
    PoseHeadOutputs,
    StudentOutputs,
    TeacherOutputs,
)

__all__ = [
    "EncoderConfig",
    "ModelBundle",
    "TEACHER_GROUPS",
    "STUDENT_GROUPS",
    "PoseHeadOutputs",
    "TeacherOutputs",
    "StudentOutputs",
    "Role",
    "head_predictions",
    "predict_poses",
]
