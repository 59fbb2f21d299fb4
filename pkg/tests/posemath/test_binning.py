"""
Tests for bin/offset encoding and decoding.

Covers:
  - Bin spec tiling validation
  - Known encodings (origin, 37.5°, elevation boundaries)
  - Decode with arg-max tie-breaking
  - Encode/decode round trip over random poses
"""

import math

import numpy as np
import pytest

from posedistill.posemath import (
    DEFAULT_BIN_SPEC,
    Angle,
    AngleBinSpec,
    EulerPose,
    PosePrediction,
    PoseTarget,
    decode_pose,
    encode_pose,
    encode_poses,
    one_hot_prediction,
    wrap_angle,
)

_B = math.pi / 12


def _prediction(alpha_bin_pos, alpha_offset, spec=DEFAULT_BIN_SPEC):
    scores = [np.zeros(n) for n in spec.bin_counts]
    offsets = [np.zeros(n) for n in spec.bin_counts]
    scores[0][alpha_bin_pos] = 0.9
    offsets[0][alpha_bin_pos] = alpha_offset
    # elevation position 6 is bin 0
    scores[1][6] = 1.0
    scores[2][12] = 1.0
    return PosePrediction(bin_scores=tuple(scores), offsets=tuple(offsets))


class TestAngleBinSpec:
    def test_default_counts(self):
        assert DEFAULT_BIN_SPEC.bin_counts == (24, 12, 24)
        assert DEFAULT_BIN_SPEC.bin_width == pytest.approx(_B)

    def test_index_ranges(self):
        assert DEFAULT_BIN_SPEC.index_range(Angle.AZIMUTH) == (-12, 11)
        assert DEFAULT_BIN_SPEC.index_range(Angle.ELEVATION) == (-6, 5)
        assert DEFAULT_BIN_SPEC.index_range(Angle.INPLANE) == (-12, 11)

    def test_quarter_turn_width_does_not_tile(self):
        with pytest.raises(ValueError, match="does not tile"):
            AngleBinSpec(bin_width=math.pi / 2)

    def test_coarser_consistent_spec_is_accepted(self):
        spec = AngleBinSpec(
            bin_width=math.pi / 6,
            index_range_azimuth_inplane=(-6, 5),
            index_range_elevation=(-3, 2),
        )
        assert spec.bin_counts == (12, 6, 12)

    def test_rejects_nonpositive_width(self):
        with pytest.raises(ValueError, match="bin_width must be positive"):
            AngleBinSpec(bin_width=0.0)


class TestPoseTarget:
    def test_rejects_offset_of_one(self):
        with pytest.raises(ValueError, match="offsets must lie in"):
            PoseTarget(bins=(0, 0, 0), offsets=(1.0, 0.0, 0.0))

    def test_validate_out_of_range_bin(self):
        target = PoseTarget(bins=(0, 6, 0), offsets=(0.0, 0.0, 0.0))
        with pytest.raises(ValueError, match="elevation bin must be in"):
            target.validate(DEFAULT_BIN_SPEC)


class TestEncode:
    def test_origin(self):
        target = encode_pose(EulerPose(0.0, 0.0, 0.0))
        assert target.bins == (0, 0, 0)
        assert target.offsets == (0.0, 0.0, 0.0)

    def test_thirty_seven_and_a_half_degrees(self):
        target = encode_pose(EulerPose(0.6545, 0.0, 0.0))
        assert target.bins[0] == 2
        assert target.offsets[0] == pytest.approx(0.5, abs=1e-3)

    def test_lower_elevation_boundary(self):
        target = encode_pose(EulerPose(0.0, -math.pi / 2, 0.0))
        assert target.bins[1] == -6
        assert target.offsets[1] == pytest.approx(0.0, abs=1e-12)

    def test_upper_elevation_boundary_clamps_into_top_bin(self):
        target = encode_pose(EulerPose(0.0, math.pi / 2, 0.0))
        assert target.bins[1] == 5
        assert 0.999999 < target.offsets[1] < 1.0

    def test_negative_azimuth(self):
        target = encode_pose(EulerPose(-math.pi, 0.0, -0.01))
        assert target.bins[0] == -12
        assert target.bins[2] == -1

    def test_every_bin_in_range(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            pose = EulerPose(
                rng.uniform(-math.pi, math.pi),
                rng.uniform(-math.pi / 2, math.pi / 2),
                rng.uniform(-math.pi, math.pi),
            )
            encode_pose(pose).validate(DEFAULT_BIN_SPEC)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(4)
        poses = np.column_stack(
            [
                rng.uniform(-math.pi, math.pi, 20),
                rng.uniform(-math.pi / 2, math.pi / 2, 20),
                rng.uniform(-math.pi, math.pi, 20),
            ]
        )
        bins, offsets = encode_poses(poses)
        assert bins.dtype == np.int64
        for row in range(20):
            target = encode_pose(EulerPose.from_array(poses[row]))
            assert tuple(bins[row]) == target.bins
            assert tuple(offsets[row]) == target.offsets


class TestDecode:
    def test_one_hot_origin(self):
        pred = one_hot_prediction(PoseTarget(bins=(0, 0, 0), offsets=(0.0, 0.0, 0.0)))
        assert decode_pose(pred).as_tuple() == (0.0, 0.0, 0.0)

    def test_bin_two_half_offset(self):
        # position 14 is bin 2 for azimuth
        pose = decode_pose(_prediction(14, 0.5))
        assert pose.alpha == pytest.approx(2.5 * _B, abs=1e-12)
        assert pose.alpha == pytest.approx(0.6545, abs=1e-4)

    def test_ties_go_to_smaller_bin(self):
        pred = _prediction(14, 0.5)
        pred.bin_scores[0][3] = 0.9
        pred.offsets[0][3] = 0.25
        pose = decode_pose(pred)
        assert pose.alpha == pytest.approx((-12 + 3 + 0.25) * _B, abs=1e-12)

    def test_rejects_offset_outside_unit_interval(self):
        scores = tuple(np.zeros(n) for n in DEFAULT_BIN_SPEC.bin_counts)
        offsets = tuple(np.full(n, 1.5) for n in DEFAULT_BIN_SPEC.bin_counts)
        with pytest.raises(ValueError, match="offsets must lie in"):
            PosePrediction(bin_scores=scores, offsets=offsets)

    def test_rejects_non_finite_scores(self):
        scores = tuple(np.full(n, np.nan) for n in DEFAULT_BIN_SPEC.bin_counts)
        offsets = tuple(np.zeros(n) for n in DEFAULT_BIN_SPEC.bin_counts)
        with pytest.raises(ValueError, match="finite"):
            PosePrediction(bin_scores=scores, offsets=offsets)


class TestRoundTrip:
    def test_ten_thousand_random_poses(self):
        rng = np.random.default_rng(2024)
        eps = 1e-9
        for _ in range(10_000):
            pose = EulerPose(
                rng.uniform(-math.pi, math.pi - eps),
                rng.uniform(-math.pi / 2, math.pi / 2),
                rng.uniform(-math.pi, math.pi - eps),
            )
            decoded = decode_pose(one_hot_prediction(encode_pose(pose)))
            assert abs(wrap_angle(decoded.alpha - pose.alpha)) < 1e-9
            assert abs(decoded.beta - pose.beta) < 1e-9
            assert abs(wrap_angle(decoded.gamma - pose.gamma)) < 1e-9

    def test_elevation_extremes(self):
        for beta in (-math.pi / 2, math.pi / 2):
            pose = EulerPose(0.3, beta, -0.3)
            decoded = decode_pose(one_hot_prediction(encode_pose(pose)))
            assert decoded.beta == pytest.approx(beta, abs=1e-9)
