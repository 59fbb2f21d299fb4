"""
Viewpoint mathematics: Euler poses, rotations, bin/offset encoding,
evaluation statistics, and augmentation label rules.

Every function here is pure and safe to call concurrently.
"""

from .augment import augment_flip, augment_rotate
from .binning import (
    DEFAULT_BIN_SPEC,
    AngleBinSpec,
    PosePrediction,
    PoseTarget,
    decode_pose,
    encode_pose,
    encode_poses,
    one_hot_prediction,
)
from .metrics import ACC_THRESHOLD_DEG, EmptyEvaluationError, acc30, mederr
from .rotation import (
    euler_to_matrix,
    geodesic_error_deg,
    pose_error_deg,
    rot_azimuth,
    rot_elevation,
    rot_inplane,
)
from .types import (
    ANGLES,
    HALF_PI,
    TWO_PI,
    Angle,
    EulerPose,
    RotationMatrix,
    clamp_elevation,
    wrap_angle,
)

__all__ = [
    # types
    "Angle",
    "ANGLES",
    "EulerPose",
    "RotationMatrix",
    "HALF_PI",
    "TWO_PI",
    "wrap_angle",
    "clamp_elevation",
    # rotation
    "rot_azimuth",
    "rot_elevation",
    "rot_inplane",
    "euler_to_matrix",
    "geodesic_error_deg",
    "pose_error_deg",
    # binning
    "AngleBinSpec",
    "DEFAULT_BIN_SPEC",
    "PoseTarget",
    "PosePrediction",
    "encode_pose",
    "encode_poses",
    "decode_pose",
    "one_hot_prediction",
    # metrics
    "ACC_THRESHOLD_DEG",
    "EmptyEvaluationError",
    "acc30",
    "mederr",
    # augmentation labels
    "augment_flip",
    "augment_rotate",
]
