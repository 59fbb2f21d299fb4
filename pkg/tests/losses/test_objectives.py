"""
Tests for the training objectives.

Covers:
  - Pose loss values at uniform logits and with a known offset error
  - InfoNCE on degenerate and perfectly aligned batches, scale invariance
  - Embedding and output KL values, asymmetry, non-negativity
  - Stage objectives: weighted sums, zero-weight skipping, gradient routing
  - Gradient checks of every loss against central differences
  - Error cases: small batches, zero-norm rows, out-of-range bins
"""

import math

import numpy as np
import pytest

from posedistill.diffmath import (
    ShapeError,
    Tape,
    Tensor,
    ZeroNormError,
    backward,
    grad_check,
)
from posedistill.errors import ConfigError
from posedistill.losses import (
    EmbeddingMatch,
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
from posedistill.models import EncoderConfig, ModelBundle, PoseHeadOutputs

_WIDTHS = (24, 12, 24)
_GRAD_TOL = 1e-4
_INSTANCES = range(20)

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


def _poses(batch, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(batch, 3))


def _heads(logits, offsets):
    return PoseHeadOutputs(
        logits=tuple(Tensor(v) if not isinstance(v, Tensor) else v for v in logits),
        offsets=tuple(Tensor(v) if not isinstance(v, Tensor) else v for v in offsets),
    )


def _exact_offsets(targets):
    # every bin carries the ground-truth offset, so the regression term vanishes
    return [
        np.repeat(targets.offsets[:, col : col + 1], width, axis=1)
        for col, width in enumerate(_WIDTHS)
    ]


def _inputs(batch, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.uniform(0.0, 1.0, size=(batch, 8, 8))
    clouds = rng.uniform(-0.5, 0.5, size=(batch, 16, 3))
    return images, clouds


@pytest.fixture(scope="module")
def targets():
    return PoseTargets.from_poses(_poses(4))


# ── Weights ────────────────────────────────────────────────────────────────────


class TestLossWeights:
    def test_defaults(self):
        w = LossWeights()
        assert (w.kappa1, w.kappa2) == (1.0, 0.5)
        assert (w.omega1, w.omega2, w.omega3) == (0.25, 0.75, 0.75)
        assert w.tau == 0.1

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError, match="omega2"):
            LossWeights(omega2=-0.1)

    def test_tau_must_be_positive(self):
        with pytest.raises(ConfigError, match="tau"):
            LossWeights(tau=0.0)


# ── Pose loss ──────────────────────────────────────────────────────────────────


class TestPoseLoss:
    def test_uniform_logits(self, targets):
        logits = [np.zeros((4, w)) for w in _WIDTHS]
        loss = pose_loss(_heads(logits, _exact_offsets(targets)), targets)
        expected = 2 * math.log(24) + math.log(12)
        assert loss.item() == pytest.approx(expected, abs=1e-9)

    def test_offset_error_is_smooth_l1(self, targets):
        logits = []
        for col, width in enumerate(_WIDTHS):
            lo = -width // 2
            v = np.zeros((4, width))
            v[np.arange(4), targets.bins[:, col] - lo] = 60.0
            logits.append(v)
        offsets = _exact_offsets(targets)
        offsets[1] = offsets[1] + 0.2
        loss = pose_loss(_heads(logits, offsets), targets)
        assert loss.item() == pytest.approx(0.02, abs=1e-9)

    def test_decreases_as_true_logit_grows(self, targets):
        values = []
        for boost in (0.0, 1.0, 2.0, 4.0):
            logits = [np.zeros((4, w)) for w in _WIDTHS]
            logits[0][np.arange(4), targets.bins[:, 0] + 12] = boost
            values.append(pose_loss(_heads(logits, _exact_offsets(targets)), targets).item())
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_bin_outside_range(self, targets):
        bad = PoseTargets(bins=targets.bins.copy(), offsets=targets.offsets)
        bad.bins[0, 1] = 6
        logits = [np.zeros((4, w)) for w in _WIDTHS]
        with pytest.raises(ValueError, match="target bin outside"):
            pose_loss(_heads(logits, _exact_offsets(targets)), bad)

    def test_head_width_mismatch(self, targets):
        logits = [np.zeros((4, w)) for w in (24, 11, 24)]
        offsets = [np.zeros((4, w)) for w in (24, 11, 24)]
        with pytest.raises(ShapeError, match="logits must be"):
            pose_loss(_heads(logits, offsets), targets)

    @pytest.mark.parametrize("seed", _INSTANCES)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        tg = PoseTargets.from_poses(_poses(3, seed))
        inputs = {}
        for col, width in enumerate(_WIDTHS):
            inputs[f"logit{col}"] = rng.normal(size=(3, width))
            inputs[f"offset{col}"] = rng.uniform(0.0, 1.0, size=(3, width))

        def fn(t):
            return pose_loss(
                _heads([t[f"logit{c}"] for c in range(3)], [t[f"offset{c}"] for c in range(3)]),
                tg,
            )

        assert grad_check(fn, inputs) < _GRAD_TOL


# ── InfoNCE ────────────────────────────────────────────────────────────────────


class TestInfoNCE:
    def test_identical_rows_give_log_n(self):
        z = np.tile([1.0, 2.0, -1.0], (8, 1))
        h = np.tile([0.5, -0.3, 2.0], (8, 1))
        assert infonce(z, h, 0.1).item() == pytest.approx(math.log(8), abs=1e-12)

    def test_perfect_alignment(self):
        eye = np.eye(4)
        expected = math.log(1.0 + 3.0 * math.exp(-10.0))
        assert infonce(eye, eye, 0.1).item() == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(1.362e-4, rel=1e-3)

    def test_scale_invariant(self):
        rng = np.random.default_rng(3)
        z, h = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        assert infonce(3.0 * z, h, 0.1).item() == pytest.approx(infonce(z, h, 0.1).item(), abs=1e-12)

    def test_needs_two_rows(self):
        with pytest.raises(ShapeError, match="at least 2"):
            infonce(np.ones((1, 3)), np.ones((1, 3)), 0.1)

    def test_zero_norm_row(self):
        z = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(ZeroNormError):
            infonce(z, np.ones((2, 3)), 0.1)

    @pytest.mark.parametrize("seed", _INSTANCES)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"z": rng.normal(size=(4, 5)), "h": rng.normal(size=(4, 5))}
        assert grad_check(lambda t: infonce(t["z"], t["h"], 0.1), inputs) < _GRAD_TOL


# ── KL terms ───────────────────────────────────────────────────────────────────


class TestKL:
    def test_known_value(self):
        p = np.log([[0.5, 0.5]])
        q = np.log([[0.9, 0.1]])
        assert kl_embed(p, q).item() == pytest.approx(0.5108, abs=1e-4)

    def test_asymmetric(self):
        p = np.log([[0.5, 0.5]])
        q = np.log([[0.9, 0.1]])
        assert kl_embed(q, p).item() == pytest.approx(0.3681, abs=1e-4)

    def test_non_negative(self):
        rng = np.random.default_rng(7)
        a = rng.normal(scale=3.0, size=(1000, 6))
        b = rng.normal(scale=3.0, size=(1000, 6))
        for i in range(0, 1000, 100):
            assert kl_embed(a[i : i + 100], b[i : i + 100]).item() >= 0.0
        assert kl_embed(a, a).item() == pytest.approx(0.0, abs=1e-12)

    def test_one_hot_teacher_against_uniform_student(self):
        teacher = np.zeros((2, 24))
        teacher[:, 5] = 100.0
        student = np.zeros((2, 24))
        assert kl_output([teacher], [student]).item() == pytest.approx(math.log(24), abs=1e-6)

    def test_output_head_count_mismatch(self):
        with pytest.raises(ShapeError, match="heads"):
            kl_output([np.zeros((2, 4))], [np.zeros((2, 4)), np.zeros((2, 4))])

    @pytest.mark.parametrize("seed", _INSTANCES)
    def test_embed_gradient(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"zt": rng.normal(size=(3, 6)), "zs": rng.normal(size=(3, 6))}
        assert grad_check(lambda t: kl_embed(t["zt"], t["zs"]), inputs) < _GRAD_TOL

    @pytest.mark.parametrize("seed", _INSTANCES)
    def test_output_gradient(self, seed):
        rng = np.random.default_rng(seed)
        teacher = [rng.normal(size=(3, w)) for w in _WIDTHS]
        inputs = {f"s{c}": rng.normal(size=(3, w)) for c, w in enumerate(_WIDTHS)}

        def fn(t):
            return kl_output(teacher, [t[f"s{c}"] for c in range(3)])

        assert grad_check(fn, inputs) < _GRAD_TOL

    def test_output_does_not_reach_teacher(self):
        tape = Tape()
        t = tape.watch("t", np.random.default_rng(0).normal(size=(2, 4)))
        s = tape.watch("s", np.zeros((2, 4)))
        grads = backward(tape, kl_output([t], [s]))
        assert not np.any(grads.get("t", np.zeros(1)))
        assert np.abs(grads["s"]).sum() > 0.0


# ── Stage objectives ───────────────────────────────────────────────────────────


@pytest.fixture(scope="module")
def batch():
    images, clouds = _inputs(4, seed=11)
    return images, clouds, PoseTargets.from_poses(_poses(4, seed=11))


class TestTeacherLoss:
    def test_total_is_weighted_sum(self, batch):
        images, clouds, tg = batch
        bundle = ModelBundle.create(_ENC, seed=0)
        out = bundle.teacher_forward(bundle.bind(None), images, clouds)
        w = LossWeights()
        loss = teacher_loss(out, tg, w)
        assert set(loss.terms) == {"pose", "cl"}
        expected = w.kappa1 * loss.terms["pose"] + w.kappa2 * loss.terms["cl"]
        assert abs(loss.value - expected) <= 1e-12

    def test_zero_weight_term_skipped(self, batch):
        images, clouds, tg = batch
        bundle = ModelBundle.create(_ENC, seed=0)
        out = bundle.teacher_forward(bundle.bind(None), images, clouds)
        loss = teacher_loss(out, tg, LossWeights(kappa2=0.0))
        assert set(loss.terms) == {"pose"}
        assert loss.value == pytest.approx(loss.terms["pose"], abs=1e-12)

    def test_all_weights_zero(self, batch):
        images, clouds, tg = batch
        bundle = ModelBundle.create(_ENC, seed=0)
        out = bundle.teacher_forward(bundle.bind(None), images, clouds)
        with pytest.raises(ConfigError, match="zero"):
            teacher_loss(out, tg, LossWeights(kappa1=0.0, kappa2=0.0))


class TestStudentLoss:
    def _forward(self, batch, seed=1):
        images, clouds, tg = batch
        bundle = ModelBundle.create(_ENC, seed=seed)
        tape = Tape()
        params = bundle.bind(tape)
        teacher = bundle.teacher_forward(params, images, clouds)
        student = bundle.student_forward(params, images, training=True)
        return tape, teacher, student, tg

    def test_total_is_weighted_sum(self, batch):
        _, teacher, student, tg = self._forward(batch)
        w = LossWeights()
        loss = student_loss(
            student, tg, w, bridge=teacher.z_t, teacher_logits=teacher.heads.logits
        )
        assert set(loss.terms) == {"pose", "kl", "kd"}
        expected = (
            w.omega1 * loss.terms["pose"]
            + w.omega2 * loss.terms["kl"]
            + w.omega3 * loss.terms["kd"]
        )
        assert abs(loss.value - expected) <= 1e-12

    def test_one_sided_infonce_variant(self, batch):
        _, teacher, student, tg = self._forward(batch)
        loss = student_loss(
            student,
            tg,
            LossWeights(),
            bridge=teacher.h_t,
            teacher_logits=teacher.heads.logits,
            match=EmbeddingMatch.INFONCE,
        )
        assert set(loss.terms) == {"pose", "cl", "kd"}

    def test_gradients_reach_student_only(self, batch):
        tape, teacher, student, tg = self._forward(batch)
        loss = student_loss(
            student, tg, LossWeights(), bridge=teacher.z_t, teacher_logits=teacher.heads.logits
        )
        grads = backward(tape, loss.total)
        assert np.abs(grads["student.head_stack.l0.w"]).sum() > 0.0
        for name in ("teacher.fusenet.l0.w", "teacher.image_encoder.l0.w"):
            assert name not in grads or not grads[name].any()

    def test_missing_bridge(self, batch):
        _, teacher, student, tg = self._forward(batch)
        with pytest.raises(ValueError, match="bridge"):
            student_loss(student, tg, LossWeights(), teacher_logits=teacher.heads.logits)

    def test_pose_only_needs_no_teacher(self, batch):
        _, _, student, tg = self._forward(batch)
        loss = student_loss(student, tg, LossWeights(omega2=0.0, omega3=0.0))
        assert set(loss.terms) == {"pose"}


class TestJointLoss:
    def test_gradients_reach_both_networks(self, batch):
        images, clouds, tg = batch
        bundle = ModelBundle.create(_ENC, seed=2)
        tape = Tape()
        params = bundle.bind(tape)
        teacher = bundle.teacher_forward(params, images, clouds)
        student = bundle.student_forward(params, images, training=True)
        loss = joint_loss(teacher, student, tg, LossWeights())
        assert set(loss.terms) == {"pose", "pose_student", "cl"}
        grads = backward(tape, loss.total)
        assert np.abs(grads["teacher.fusenet.l0.w"]).sum() > 0.0
        assert np.abs(grads["student.head_stack.l0.w"]).sum() > 0.0

    def test_total_is_weighted_sum(self, batch):
        images, clouds, tg = batch
        bundle = ModelBundle.create(_ENC, seed=2)
        params = bundle.bind(None)
        teacher = bundle.teacher_forward(params, images, clouds)
        student = bundle.student_forward(params, images)
        w = LossWeights(kappa1=0.7, kappa2=0.3)
        loss = joint_loss(teacher, student, tg, w)
        expected = 0.7 * (loss.terms["pose"] + loss.terms["pose_student"]) + 0.3 * loss.terms["cl"]
        assert abs(loss.value - expected) <= 1e-12
