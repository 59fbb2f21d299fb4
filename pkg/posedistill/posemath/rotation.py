"""
Euler-angle composition and the geodesic rotation error.

Camera frame: x to the right, y up, z towards the viewer. The elementary
rotations are

    R_azim(θ)    about y   [[ c, 0, s], [0, 1, 0], [-s, 0, c]]
    R_elev(θ)    about x   [[1, 0, 0], [0, c, -s], [0, s, c]]
    R_inplane(θ) about z   [[c, -s, 0], [s, c, 0], [0, 0, 1]]

and a pose composes as R = R_inplane(γ) · R_elev(-β) · R_azim(-α).
A horizontal image flip (x → -x) commutes with R_elev and negates the
other two angles, which is what makes the flip label rule exact for
shapes that are mirror-symmetric in their canonical x.
"""

from __future__ import annotations

import math

import numpy as np

from .types import EulerPose, RotationMatrix


def rot_azimuth(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_elevation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_inplane(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(pose: EulerPose) -> RotationMatrix:
    """Compose R = R_inplane(γ) · R_elev(-β) · R_azim(-α)."""
    m = rot_inplane(pose.gamma) @ rot_elevation(-pose.beta) @ rot_azimuth(-pose.alpha)
    return RotationMatrix(m)


def geodesic_error_deg(r1: RotationMatrix, r2: RotationMatrix) -> float:
    """
    Angle of the relative rotation r1ᵀ r2, in degrees within [0, 180].

    The cosine is clamped to [-1, 1] before arccos so that round-off on
    identical or antipodal rotations never produces NaN.
    """
    cos_theta = (float(np.trace(r1.m.T @ r2.m)) - 1.0) / 2.0
    cos_theta = min(1.0, max(-1.0, cos_theta))
    return math.degrees(math.acos(cos_theta))


def pose_error_deg(predicted: EulerPose, truth: EulerPose) -> float:
    """Geodesic error between two Euler poses."""
    return geodesic_error_deg(euler_to_matrix(predicted), euler_to_matrix(truth))
