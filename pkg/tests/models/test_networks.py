"""
Tests for the teacher/student networks.

Covers:
  - Output shapes and activation ranges
  - Point-encoder permutation invariance
  - Contrastive Learner dimensions and sensitivity to R_t
  - Eval-mode batch independence of the student
  - Freezing, batch-norm modes, and checkpoint round trips
"""

import numpy as np
import pytest

from posedistill.diffmath import ShapeError, Tape, backward, sum_, write_params
from posedistill.errors import CheckpointError, ConfigError
from posedistill.models import (
    STUDENT_GROUPS,
    TEACHER_GROUPS,
    EncoderConfig,
    ModelBundle,
    predict_poses,
)

_ENC = EncoderConfig(
    resolution=8,
    n_points=16,
    teacher_image_dim=12,
    teacher_image_hidden=(16,),
    shape_dim=10,
    point_hidden=(8,),
    fusenet=(12, 10, 8, 6),
    teacher_projection_hidden=(12, 8),
    student_image_dim=14,
    student_image_hidden=(16,),
    student_head=(10, 8, 6),
    student_projection_hidden=(8,),
    fused_dim=6,
)


def _inputs(batch, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.uniform(0.0, 1.0, size=(batch, 8, 8)).astype(np.float32)
    clouds = rng.uniform(-0.5, 0.5, size=(batch, 16, 3)).astype(np.float32)
    return images, clouds


@pytest.fixture(scope="module")
def bundle():
    return ModelBundle.create(_ENC, seed=1)


# ── Configuration ──────────────────────────────────────────────────────────────


class TestEncoderConfig:
    def test_default_dimension_chain(self):
        cfg = EncoderConfig()
        assert cfg.fusenet[-1] == cfg.student_head[-1] == cfg.fused_dim == 16
        assert (cfg.teacher_image_dim, cfg.shape_dim, cfg.student_image_dim) == (64, 64, 128)

    def test_fusenet_must_end_at_fused_dim(self):
        with pytest.raises(ConfigError, match="fusenet must end"):
            EncoderConfig(fusenet=(64, 32, 8))

    def test_student_head_must_end_at_fused_dim(self):
        with pytest.raises(ConfigError, match="student_head must end"):
            EncoderConfig(student_head=(64, 32))

    def test_dict_round_trip(self):
        assert EncoderConfig.from_dict(_ENC.to_dict()) == _ENC


# ── Teacher ────────────────────────────────────────────────────────────────────


class TestTeacherForward:
    @pytest.mark.parametrize("batch", [1, 5])
    def test_head_shapes(self, bundle, batch):
        images, clouds = _inputs(batch)
        out = bundle.teacher_forward(bundle.bind(None), images, clouds)
        assert [t.shape for t in out.heads.logits] == [(batch, 24), (batch, 12), (batch, 24)]
        assert [t.shape for t in out.heads.offsets] == [(batch, 24), (batch, 12), (batch, 24)]
        assert out.h_t.shape == (batch, 6)
        assert out.z_t.shape == (batch, 6)

    def test_h_t_inside_open_unit_interval(self, bundle):
        out = bundle.teacher_forward(bundle.bind(None), *_inputs(20))
        assert np.abs(out.h_t.value).max() < 1.0

    def test_offsets_in_unit_interval(self, bundle):
        out = bundle.teacher_forward(bundle.bind(None), *_inputs(20))
        for off in out.heads.offsets:
            assert off.value.min() >= 0.0 and off.value.max() <= 1.0

    def test_point_order_does_not_matter(self, bundle):
        images, clouds = _inputs(3)
        perm = np.random.default_rng(5).permutation(16)
        params = bundle.bind(None)
        a = bundle.teacher_forward(params, images, clouds)
        b = bundle.teacher_forward(params, images, clouds[:, perm])
        assert np.abs(a.d_t.value - b.d_t.value).max() <= 1e-12
        assert np.abs(a.h_t.value - b.h_t.value).max() <= 1e-12

    def test_deterministic(self, bundle):
        images, clouds = _inputs(4)
        a = bundle.teacher_forward(bundle.bind(None), images, clouds)
        b = bundle.teacher_forward(bundle.bind(None), images, clouds)
        assert np.array_equal(a.h_t.value, b.h_t.value)

    def test_image_shape_mismatch(self, bundle):
        _, clouds = _inputs(2)
        with pytest.raises(ShapeError, match="images must be"):
            bundle.teacher_forward(bundle.bind(None), np.zeros((2, 9, 9)), clouds)

    def test_cloud_shape_mismatch(self, bundle):
        images, _ = _inputs(2)
        with pytest.raises(ShapeError, match="clouds must be"):
            bundle.teacher_forward(bundle.bind(None), images, np.zeros((2, 16, 2)))


class TestContrastiveForward:
    def test_dimension_is_fused_dim(self, bundle):
        images, _ = _inputs(4)
        assert bundle.contrastive_forward(bundle.bind(None), images).shape == (4, 6)

    def test_matches_teacher_forward(self, bundle):
        images, clouds = _inputs(4)
        params = bundle.bind(None)
        z = bundle.contrastive_forward(params, images)
        assert np.array_equal(z.value, bundle.teacher_forward(params, images, clouds).z_t.value)

    def test_identical_images_identical_embeddings(self, bundle):
        images, _ = _inputs(1)
        z = bundle.contrastive_forward(bundle.bind(None), np.concatenate([images, images]))
        assert np.array_equal(z.value[0], z.value[1])

    def test_sensitive_to_image_encoder(self):
        local = ModelBundle.create(_ENC, seed=2)
        images, _ = _inputs(3)
        before = np.linalg.norm(local.contrastive_forward(local.bind(None), images).value)
        w = local.store.value("teacher.image_encoder.l0.w").copy()
        w[0, 0] += 1e-3
        local.store.set_value("teacher.image_encoder.l0.w", w)
        after = np.linalg.norm(local.contrastive_forward(local.bind(None), images).value)
        assert after != before

    def test_gradient_reaches_image_encoder(self):
        local = ModelBundle.create(_ENC, seed=2)
        tape = Tape()
        z = local.contrastive_forward(local.bind(tape), _inputs(3)[0])
        grads = backward(tape, sum_(z))
        assert np.abs(grads["teacher.image_encoder.l0.w"]).sum() > 0.0
        assert "teacher.fusenet.l0.w" not in grads or not grads["teacher.fusenet.l0.w"].any()


# ── Student ────────────────────────────────────────────────────────────────────


class TestStudentForward:
    def test_dimensions(self, bundle):
        out = bundle.student_forward(bundle.bind(None), _inputs(4)[0])
        assert out.h_s.shape == out.z_s.shape == (4, 6)
        assert out.x_s.shape == (4, 14)

    def test_eval_rows_are_batch_independent(self, bundle):
        images, _ = _inputs(6)
        params = bundle.bind(None)
        batched = bundle.student_forward(params, images).z_s.value
        for i in range(6):
            single = bundle.student_forward(params, images[i : i + 1]).z_s.value[0]
            assert np.abs(single - batched[i]).max() <= 1e-12

    def test_training_mode_updates_running_stats(self):
        local = ModelBundle.create(_ENC, seed=3)
        before = local.store.buffer("student.head_stack.bn0.running_mean").copy()
        local.student_forward(local.bind(Tape()), _inputs(4)[0], training=True)
        assert not np.array_equal(local.store.buffer("student.head_stack.bn0.running_mean"), before)

    def test_frozen_head_stack_uses_eval_statistics(self):
        local = ModelBundle.create(_ENC, seed=3)
        local.freeze("student")
        before = local.store.buffer("student.head_stack.bn0.running_mean").copy()
        local.student_forward(local.bind(Tape()), _inputs(4)[0], training=True)
        assert np.array_equal(local.store.buffer("student.head_stack.bn0.running_mean"), before)

    def test_training_needs_two_rows(self):
        local = ModelBundle.create(_ENC, seed=3)
        with pytest.raises(ShapeError, match="at least 2"):
            local.student_forward(local.bind(Tape()), _inputs(1)[0], training=True)


# ── Freezing ───────────────────────────────────────────────────────────────────


class TestFreeze:
    def test_groups_registered(self, bundle):
        assert tuple(bundle.store.groups) == TEACHER_GROUPS + STUDENT_GROUPS

    def test_frozen_teacher_gets_no_gradient(self):
        local = ModelBundle.create(_ENC, seed=4)
        local.freeze("teacher")
        tape = Tape()
        out = local.teacher_forward(local.bind(tape), *_inputs(3))
        assert not out.h_t.on_tape
        assert local.is_frozen("teacher") and not local.is_frozen("student")

    def test_unfreeze_restores_gradient_flow(self):
        local = ModelBundle.create(_ENC, seed=4)
        local.freeze("teacher")
        local.unfreeze("teacher")
        tape = Tape()
        out = local.teacher_forward(local.bind(tape), *_inputs(3))
        grads = backward(tape, sum_(out.h_t))
        assert np.abs(grads["teacher.fusenet.l0.w"]).sum() > 0.0

    def test_single_group(self):
        local = ModelBundle.create(_ENC, seed=4)
        local.freeze(["teacher.projection"])
        assert local.store.is_frozen("teacher.projection.l0.w")
        assert not local.store.is_frozen("teacher.fusenet.l0.w")

    def test_unknown_group(self):
        with pytest.raises(ValueError, match="unknown parameter group"):
            ModelBundle.create(_ENC, seed=4).freeze("teacher.decoder")


# ── Persistence ────────────────────────────────────────────────────────────────


class TestPersistence:
    def test_round_trip(self, bundle, tmp_path):
        bundle.save(tmp_path, {"kind": "teacher"})
        loaded, header = ModelBundle.load(tmp_path)
        assert loaded.config == _ENC
        assert header["kind"] == "teacher"
        images, clouds = _inputs(3)
        a = bundle.teacher_forward(bundle.bind(None), images, clouds).h_t.value
        b = loaded.teacher_forward(loaded.bind(None), images, clouds).h_t.value
        assert np.array_equal(a, b)

    def test_adopt_copies_only_teacher(self):
        source = ModelBundle.create(_ENC, seed=10)
        target = ModelBundle.create(_ENC, seed=11)
        student_before = target.store.snapshot("student.head_stack")
        target.adopt(source, "teacher")
        assert np.array_equal(
            target.store.value("teacher.fusenet.l0.w"), source.store.value("teacher.fusenet.l0.w")
        )
        for name, value in student_before.items():
            assert np.array_equal(target.store.value(name), value)

    def test_adopt_rejects_other_topology(self):
        other = ModelBundle.create(EncoderConfig(resolution=16, n_points=16), seed=0)
        with pytest.raises(CheckpointError, match="topologies differ"):
            ModelBundle.create(_ENC, seed=0).adopt(other)

    def test_incompatible_data(self, bundle):
        with pytest.raises(CheckpointError, match="expects 8px"):
            bundle.check_compatible(32, 16)

    def test_missing_topology(self, bundle, tmp_path):
        write_params(bundle.store, tmp_path, {"kind": "teacher"})
        with pytest.raises(CheckpointError, match="no model topology"):
            ModelBundle.load(tmp_path)


# ── Inference ──────────────────────────────────────────────────────────────────


class TestPredictPoses:
    def test_batch_size_does_not_matter(self, bundle):
        images, _ = _inputs(7)
        a = predict_poses(bundle, images, batch_size=7)
        b = predict_poses(bundle, images, batch_size=2)
        assert a.shape == (7, 3)
        assert np.allclose(a, b, rtol=0.0, atol=1e-12)

    def test_teacher_needs_clouds(self, bundle):
        with pytest.raises(ValueError, match="point clouds"):
            predict_poses(bundle, _inputs(2)[0], role="teacher")
