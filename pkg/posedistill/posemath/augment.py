"""
Label transforms that accompany pose-related image augmentation.

A horizontal image flip negates azimuth and in-plane rotation; an image
rotation by φ adds φ to the in-plane rotation. Both are pure functions.
"""

from __future__ import annotations

from .types import EulerPose


def augment_flip(pose: EulerPose) -> EulerPose:
    """(α, β, γ) → (-α, β, -γ), wrapped. An involution."""
    return EulerPose(-pose.alpha, pose.beta, -pose.gamma)


def augment_rotate(pose: EulerPose, phi: float) -> EulerPose:
    """(α, β, γ) → (α, β, γ + φ), wrapped."""
    return EulerPose(pose.alpha, pose.beta, pose.gamma + phi)
