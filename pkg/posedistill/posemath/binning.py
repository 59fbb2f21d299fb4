"""
Coarse-to-fine angle parameterization: bin index plus in-bin offset.

Each angle θ is split uniformly into bins of width B. The ground truth is
the bin index ``floor(θ / B)`` and the proportion ``θ / B - bin`` inside it;
a prediction is decoded as ``(j + δ_j) · B`` for the arg-max bin j.

The default B = π/12 (15°) is the only width consistent with the index
ranges [-12, 11] for azimuth/in-plane and [-6, 5] for elevation. The
"π/2" bin size quoted in the method description contradicts those ranges
and is not used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import ANGLES, TWO_PI, Angle, EulerPose

_TILING_TOL = 1e-12
_OFFSET_MAX: float = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class AngleBinSpec:
    """
    Bin layout for the three angles.

    Index ranges are inclusive integer intervals. bin_width × (number of
    bins) must tile the angle's domain exactly: 2π for azimuth and in-plane,
    π for elevation.
    """

    bin_width: float = math.pi / 12
    index_range_azimuth_inplane: tuple[int, int] = (-12, 11)
    index_range_elevation: tuple[int, int] = (-6, 5)

    def __post_init__(self) -> None:
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be positive, got {self.bin_width}")
        for name, (lo, hi), domain in (
            ("index_range_azimuth_inplane", self.index_range_azimuth_inplane, TWO_PI),
            ("index_range_elevation", self.index_range_elevation, math.pi),
        ):
            if hi < lo:
                raise ValueError(f"{name} must satisfy lo <= hi, got ({lo}, {hi})")
            covered = self.bin_width * (hi - lo + 1)
            if abs(covered - domain) > _TILING_TOL:
                raise ValueError(
                    f"{name} with bin_width {self.bin_width} covers {covered}, "
                    f"which does not tile the domain width {domain}"
                )

    def index_range(self, angle: Angle) -> tuple[int, int]:
        if angle is Angle.ELEVATION:
            return self.index_range_elevation
        return self.index_range_azimuth_inplane

    def n_bins(self, angle: Angle) -> int:
        lo, hi = self.index_range(angle)
        return hi - lo + 1

    @property
    def bin_counts(self) -> tuple[int, int, int]:
        return (
            self.n_bins(Angle.AZIMUTH),
            self.n_bins(Angle.ELEVATION),
            self.n_bins(Angle.INPLANE),
        )


DEFAULT_BIN_SPEC = AngleBinSpec()


@dataclass(frozen=True)
class PoseTarget:
    """Ground-truth bin index and in-bin offset per angle (α, β, γ order)."""

    bins: tuple[int, int, int]
    offsets: tuple[float, float, float]

    def __post_init__(self) -> None:
        for off in self.offsets:
            if not (0.0 <= off < 1.0):
                raise ValueError(f"offsets must lie in [0, 1), got {off}")

    def validate(self, spec: AngleBinSpec) -> None:
        """Raise ValueError if any bin is outside its angle's index range."""
        for angle, b in zip(ANGLES, self.bins):
            lo, hi = spec.index_range(angle)
            if not (lo <= b <= hi):
                raise ValueError(f"{angle.value} bin must be in [{lo}, {hi}], got {b}")


@dataclass(frozen=True)
class PosePrediction:
    """
    Per-angle bin scores and per-bin offsets, as produced by a pose head.

    Arrays are float64, one per angle: scores of length n_bins, offsets of
    the same length with values in [0, 1].
    """

    bin_scores: tuple[np.ndarray, np.ndarray, np.ndarray]
    offsets: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        for scores, offs in zip(self.bin_scores, self.offsets):
            if scores.shape != offs.shape:
                raise ValueError(
                    f"bin_scores and offsets must share a shape, got {scores.shape} and {offs.shape}"
                )
            if not np.all(np.isfinite(scores)):
                raise ValueError("bin_scores must be finite")
            if np.any(offs < 0.0) or np.any(offs > 1.0):
                raise ValueError("offsets must lie in [0, 1]")


def _encode_angle(theta: float, width: float, lo: int, hi: int) -> tuple[int, float]:
    scaled = theta / width
    b = math.floor(scaled)
    b = min(hi, max(lo, b))
    offset = scaled - b
    # The closed upper boundary (β = +π/2) lands on offset 1 of the top bin.
    return b, min(_OFFSET_MAX, max(0.0, offset))


def encode_pose(pose: EulerPose, spec: AngleBinSpec = DEFAULT_BIN_SPEC) -> PoseTarget:
    """Encode a pose into per-angle (bin, offset) supervision."""
    bins: list[int] = []
    offsets: list[float] = []
    for angle, theta in zip(ANGLES, pose.as_tuple()):
        lo, hi = spec.index_range(angle)
        b, off = _encode_angle(theta, spec.bin_width, lo, hi)
        bins.append(b)
        offsets.append(off)
    return PoseTarget(
        bins=(bins[0], bins[1], bins[2]),
        offsets=(offsets[0], offsets[1], offsets[2]),
    )


def encode_poses(
    poses: np.ndarray, spec: AngleBinSpec = DEFAULT_BIN_SPEC
) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized encode for a (B, 3) array of (α, β, γ) radians.

    Returns (bins, offsets): int64 and float64 arrays of shape (B, 3), with
    the same values encode_pose would give row by row.
    """
    poses = np.asarray(poses, dtype=np.float64)
    bins = np.empty(poses.shape, dtype=np.int64)
    offsets = np.empty(poses.shape, dtype=np.float64)
    for row in range(poses.shape[0]):
        target = encode_pose(EulerPose.from_array(poses[row]), spec)
        bins[row] = target.bins
        offsets[row] = target.offsets
    return bins, offsets


def decode_pose(pred: PosePrediction, spec: AngleBinSpec = DEFAULT_BIN_SPEC) -> EulerPose:
    """
    Decode θ̂ = (j + δ_j)·B for the arg-max bin j of every angle.

    Ties go to the smaller bin index (np.argmax keeps the first maximum and
    array position grows with the bin index).
    """
    values: list[float] = []
    for angle, scores, offs in zip(ANGLES, pred.bin_scores, pred.offsets):
        lo, _ = spec.index_range(angle)
        pos = int(np.argmax(scores))
        values.append((lo + pos + float(offs[pos])) * spec.bin_width)
    return EulerPose(values[0], values[1], values[2])


def one_hot_prediction(
    target: PoseTarget, spec: AngleBinSpec = DEFAULT_BIN_SPEC
) -> PosePrediction:
    """A prediction scoring the target bins 1 with the target offsets there."""
    scores: list[np.ndarray] = []
    offsets: list[np.ndarray] = []
    for angle, b, off in zip(ANGLES, target.bins, target.offsets):
        lo, _ = spec.index_range(angle)
        s = np.zeros(spec.n_bins(angle))
        o = np.zeros(spec.n_bins(angle))
        s[b - lo] = 1.0
        o[b - lo] = off
        scores.append(s)
        offsets.append(o)
    return PosePrediction(
        bin_scores=(scores[0], scores[1], scores[2]),
        offsets=(offsets[0], offsets[1], offsets[2]),
    )

