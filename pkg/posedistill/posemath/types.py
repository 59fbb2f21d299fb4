"""
Core viewpoint types.

All types are frozen dataclasses with fail-fast validation in __post_init__.
Angles are float64 radians everywhere; degrees appear only in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

HALF_PI: float = math.pi / 2
TWO_PI: float = 2.0 * math.pi

_ORTHO_TOL = 1e-9


def wrap_angle(angle: float) -> float:
    """Wrap *angle* into [-π, π). Values already in range are returned unchanged."""
    if -math.pi <= angle < math.pi:
        return angle
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    wrapped = math.fmod(angle + math.pi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    wrapped -= math.pi
    # fmod can land exactly on +π after the shift
    if wrapped >= math.pi:
        wrapped -= TWO_PI
    return wrapped


def clamp_elevation(angle: float) -> float:
    """Clamp *angle* into the closed elevation interval [-π/2, π/2]."""
    if not math.isfinite(angle):
        raise ValueError(f"elevation must be finite, got {angle}")
    return min(HALF_PI, max(-HALF_PI, angle))


class Angle(str, Enum):
    """The three Euler angles of a viewpoint, in storage order."""

    AZIMUTH = "azimuth"
    ELEVATION = "elevation"
    INPLANE = "inplane"


ANGLES: tuple[Angle, ...] = (Angle.AZIMUTH, Angle.ELEVATION, Angle.INPLANE)


@dataclass(frozen=True)
class EulerPose:
    """
    Object viewpoint as (azimuth α, elevation β, in-plane rotation γ).

    alpha and gamma are wrapped into [-π, π); beta is clamped into
    [-π/2, π/2]. Construction never fails on finite input.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", wrap_angle(float(self.alpha)))
        object.__setattr__(self, "beta", clamp_elevation(float(self.beta)))
        object.__setattr__(self, "gamma", wrap_angle(float(self.gamma)))

    @classmethod
    def from_degrees(cls, alpha: float, beta: float, gamma: float) -> EulerPose:
        return cls(math.radians(alpha), math.radians(beta), math.radians(gamma))

    @classmethod
    def from_array(cls, values: np.ndarray) -> EulerPose:
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    def angle(self, which: Angle) -> float:
        return self.as_tuple()[ANGLES.index(which)]


@dataclass(frozen=True)
class RotationMatrix:
    """
    A proper 3×3 rotation.

    The array is copied to float64 and made read-only; mᵀm = I and
    det(m) = 1 are checked within 1e-9.
    """

    m: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.m, dtype=np.float64)
        if arr.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got shape {arr.shape}")
        if not np.allclose(arr.T @ arr, np.eye(3), rtol=0.0, atol=_ORTHO_TOL):
            raise ValueError("rotation matrix must be orthonormal (mᵀm = I within 1e-9)")
        det = float(np.linalg.det(arr))
        if abs(det - 1.0) > _ORTHO_TOL:
            raise ValueError(f"rotation matrix determinant must be 1, got {det}")
        arr.setflags(write=False)
        object.__setattr__(self, "m", arr)

    def __matmul__(self, other: RotationMatrix) -> RotationMatrix:
        return RotationMatrix(self.m @ other.m)

    @property
    def T(self) -> RotationMatrix:
        return RotationMatrix(self.m.T)
