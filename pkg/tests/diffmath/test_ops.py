"""
Tests for the differentiable primitives.

Every op is gradient-checked through a randomly weighted sum so that each
output coordinate contributes with a distinct coefficient. Inputs are kept
away from kinks (relu at 0, smooth-L1 at ±1, max ties).
"""

import numpy as np
import pytest

from posedistill.diffmath import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    ZeroNormError,
    add,
    backward,
    batch_norm,
    concat,
    cosine_similarity,
    exp,
    grad_check,
    l2_normalize,
    log,
    log_softmax,
    matmul,
    max_over_axis,
    mean,
    mul,
    pick,
    relu,
    reshape,
    scale,
    sigmoid,
    smooth_l1,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
)
from posedistill.diffmath.ops import detach

_SEEDS = range(10)
_TOL = 1e-6


def _weighted(out, seed):
    # same weights on every call for a given seed and shape
    rng = np.random.default_rng(1000 + seed)
    w = rng.uniform(0.5, 1.5, out.shape) * rng.choice([-1.0, 1.0], out.shape)
    return sum_(mul(out, w))


def _away_from_zero(rng, shape, lo=0.1, hi=1.0):
    return rng.uniform(lo, hi, shape) * rng.choice([-1.0, 1.0], shape)


# ── Forward values ────────────────────────────────────────────────────────────


class TestForwardValues:
    def test_softmax_of_equal_logits(self):
        assert np.allclose(softmax(np.zeros(4)).value, [0.25] * 4, atol=1e-15)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        y = softmax(rng.normal(0, 5, (20, 24)), axis=1).value
        assert np.all(y >= 0.0)
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)

    def test_cosine_similarity_with_itself(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.normal(size=7)
            assert cosine_similarity(x, x).item() == pytest.approx(1.0, abs=1e-12)

    def test_pairwise_cosine_similarity_shape(self):
        rng = np.random.default_rng(2)
        s = cosine_similarity(rng.normal(size=(5, 3)), rng.normal(size=(4, 3)))
        assert s.shape == (5, 4)
        assert np.all(np.abs(s.value) <= 1.0 + 1e-12)

    def test_matmul_of_ones(self):
        out = matmul(np.ones((2, 3)), np.ones((3, 2)))
        assert np.array_equal(out.value, np.full((2, 2), 3.0))

    def test_bias_row_broadcast(self):
        out = add(np.zeros((3, 2)), np.array([1.0, 2.0]))
        assert np.array_equal(out.value, [[1.0, 2.0]] * 3)

    def test_max_over_axis(self):
        x = np.array([[[1.0, 5.0], [3.0, 2.0]]])
        assert np.array_equal(max_over_axis(x, axis=1).value, [[3.0, 5.0]])

    def test_pick(self):
        x = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(pick(x, np.array([2, 0])).value, [2.0, 3.0])

    def test_smooth_l1_regimes(self):
        y = smooth_l1(np.array([0.2, -2.0])).value
        assert y == pytest.approx([0.02, 1.5])

    def test_constant_inputs_are_not_recorded(self):
        out = tanh(np.ones(3))
        assert out.tape is None


class TestForwardErrors:
    def test_incompatible_add(self):
        with pytest.raises(ShapeError, match="add"):
            add(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_matmul_inner_dimension(self):
        with pytest.raises(ShapeError, match="matmul"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_log_of_negative_is_non_finite(self):
        with pytest.raises(NonFiniteError, match="log"):
            log(np.array([-1.0]))

    def test_exp_overflow_is_non_finite(self):
        with pytest.raises(NonFiniteError, match="exp"):
            exp(np.array([1000.0]))

    def test_zero_norm_row(self):
        with pytest.raises(ZeroNormError):
            l2_normalize(np.zeros((2, 3)), axis=1)

    def test_pick_out_of_range(self):
        with pytest.raises(ShapeError, match="pick"):
            pick(np.zeros((2, 3)), np.array([0, 3]))

    def test_reshape_mismatch(self):
        with pytest.raises(ShapeError, match="reshape"):
            reshape(np.zeros(6), (4, 2))

    def test_batch_norm_training_needs_two_rows(self):
        with pytest.raises(ShapeError, match="at least 2"):
            batch_norm(
                np.ones((1, 3)), np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), training=True
            )

    def test_mixing_tapes(self):
        a = Tape().watch("a", np.ones(2))
        b = Tape().watch("b", np.ones(2))
        with pytest.raises(ValueError, match="different tapes"):
            add(a, b)


# ── Backward ──────────────────────────────────────────────────────────────────


class TestBackward:
    def test_square_at_three(self):
        tape = Tape()
        x = tape.watch("x", np.array(3.0))
        grads = backward(tape, mul(x, x))
        assert grads["x"] == pytest.approx(6.0)

    def test_tanh_at_zero(self):
        tape = Tape()
        x = tape.watch("x", np.array(0.0))
        assert backward(tape, tanh(x))["x"] == pytest.approx(1.0)

    def test_non_scalar_root(self):
        tape = Tape()
        x = tape.watch("x", np.ones(3))
        with pytest.raises(ShapeError, match="scalar"):
            backward(tape, relu(x))

    def test_unreachable_leaf_gets_zeros(self):
        tape = Tape()
        x = tape.watch("x", np.array(2.0))
        tape.watch("unused", np.ones((2, 2)))
        grads = backward(tape, mul(x, x))
        assert np.array_equal(grads["unused"], np.zeros((2, 2)))

    def test_reused_leaf_accumulates(self):
        tape = Tape()
        x = tape.watch("x", np.array(2.0))
        y = add(mul(x, x), scale(x, 3.0))
        assert backward(tape, y)["x"] == pytest.approx(7.0)

    def test_detach_blocks_gradient(self):
        tape = Tape()
        x = tape.watch("x", np.array(2.0))
        y = mul(x, detach(x))
        assert backward(tape, y)["x"] == pytest.approx(2.0)

    def test_double_watch(self):
        tape = Tape()
        tape.watch("x", np.ones(1))
        with pytest.raises(ValueError, match="already watched"):
            tape.watch("x", np.ones(1))

    def test_forward_values_are_bitwise_deterministic(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 5))
        w = rng.normal(size=(5, 4))
        first = softmax(tanh(matmul(x, w)), axis=1).value
        second = softmax(tanh(matmul(x, w)), axis=1).value
        assert np.array_equal(first, second)


# ── Gradient checks per primitive ─────────────────────────────────────────────


@pytest.mark.parametrize("seed", _SEEDS)
class TestPrimitiveGradients:
    def test_add_with_bias(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=3)}
        assert grad_check(lambda t: _weighted(add(t["a"], t["b"]), seed), inputs) < _TOL

    def test_sub_with_scalar(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=())}
        assert grad_check(lambda t: _weighted(sub(t["a"], t["b"]), seed), inputs) < _TOL

    def test_mul(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4))}
        assert grad_check(lambda t: _weighted(mul(t["a"], t["b"]), seed), inputs) < _TOL

    def test_matmul_and_transpose(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(2, 4))}
        fn = lambda t: _weighted(matmul(t["a"], transpose(t["b"])), seed)  # noqa: E731
        assert grad_check(fn, inputs) < _TOL

    def test_reshape_and_concat(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=(2, 6)), "b": rng.normal(size=(2, 2))}

        def fn(t):
            joined = concat([reshape(t["a"], (4, 3)), reshape(t["b"], (4, 1))], axis=1)
            return _weighted(tanh(joined), seed)

        assert grad_check(fn, inputs) < _TOL

    def test_relu(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": _away_from_zero(rng, (4, 5))}
        assert grad_check(lambda t: _weighted(relu(t["x"]), seed), inputs) < _TOL

    def test_tanh(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(size=(3, 4))}
        assert grad_check(lambda t: _weighted(tanh(t["x"]), seed), inputs) < _TOL

    def test_sigmoid(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(0, 2, size=(3, 4))}
        assert grad_check(lambda t: _weighted(sigmoid(t["x"]), seed), inputs) < _TOL

    def test_exp(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(size=(5,))}
        assert grad_check(lambda t: _weighted(exp(t["x"]), seed), inputs) < _TOL

    def test_log(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.uniform(0.5, 3.0, size=(5,))}
        assert grad_check(lambda t: _weighted(log(t["x"]), seed), inputs) < _TOL

    def test_smooth_l1(self, seed):
        rng = np.random.default_rng(seed)
        inner = rng.uniform(-0.8, 0.8, 4)
        outer = rng.uniform(1.2, 2.5, 4) * rng.choice([-1.0, 1.0], 4)
        inputs = {"x": np.concatenate([inner, outer])}
        assert grad_check(lambda t: _weighted(smooth_l1(t["x"]), seed), inputs) < _TOL

    def test_softmax(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(size=(3, 6))}
        assert grad_check(lambda t: _weighted(softmax(t["x"], axis=1), seed), inputs) < _TOL

    def test_log_softmax(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(size=(3, 6))}
        assert grad_check(lambda t: _weighted(log_softmax(t["x"], axis=1), seed), inputs) < _TOL

    def test_l2_normalize(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(size=(3, 5))}
        fn = lambda t: _weighted(l2_normalize(t["x"], axis=1), seed)  # noqa: E731
        assert grad_check(fn, inputs) < _TOL

    def test_cosine_similarity_matrix(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=(4, 3))}
        fn = lambda t: _weighted(cosine_similarity(t["a"], t["b"]), seed)  # noqa: E731
        assert grad_check(fn, inputs) < _TOL

    def test_cosine_similarity_vector(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"a": rng.normal(size=5), "b": rng.normal(size=5)}
        assert grad_check(lambda t: cosine_similarity(t["a"], t["b"]), inputs) < _TOL

    def test_batch_norm_training(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {
            "x": rng.normal(size=(6, 3)),
            "gamma": rng.uniform(0.5, 1.5, 3),
            "beta": rng.normal(size=3),
        }
        rm, rv = np.zeros(3), np.ones(3)

        def fn(t):
            out = batch_norm(t["x"], t["gamma"], t["beta"], rm, rv, training=True)
            return _weighted(out, seed)

        assert grad_check(fn, inputs) < _TOL

    def test_batch_norm_eval(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {
            "x": rng.normal(size=(4, 3)),
            "gamma": rng.uniform(0.5, 1.5, 3),
            "beta": rng.normal(size=3),
        }
        rm, rv = rng.normal(size=3), rng.uniform(0.5, 2.0, 3)

        def fn(t):
            out = batch_norm(t["x"], t["gamma"], t["beta"], rm, rv, training=False)
            return _weighted(out, seed)

        assert grad_check(fn, inputs) < _TOL

    def test_sum_and_mean_over_axis(self, seed):
        rng = np.random.default_rng(seed)
        inputs = {"x": rng.normal(size=(3, 4))}
        fn = lambda t: add(_weighted(sum_(t["x"], axis=0), seed), mean(tanh(t["x"])))  # noqa: E731
        assert grad_check(fn, inputs) < _TOL

    def test_max_over_axis(self, seed):
        rng = np.random.default_rng(seed)
        # distinct values per column, spaced far beyond the finite-difference step
        x = rng.permutation(np.arange(24.0)).reshape(2, 4, 3) * 0.1
        fn = lambda t: _weighted(max_over_axis(t["x"], axis=1), seed)  # noqa: E731
        assert grad_check(fn, {"x": x}) < _TOL

    def test_pick(self, seed):
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, 5, size=4)
        inputs = {"x": rng.normal(size=(4, 5))}
        assert grad_check(lambda t: _weighted(pick(t["x"], idx), seed), inputs) < _TOL


class TestBatchNormModes:
    def test_training_updates_running_statistics(self):
        rng = np.random.default_rng(0)
        x = rng.normal(2.0, 3.0, size=(8, 2))
        rm, rv = np.zeros(2), np.ones(2)
        batch_norm(x, np.ones(2), np.zeros(2), rm, rv, training=True)
        assert np.allclose(rm, 0.1 * x.mean(axis=0))
        assert np.allclose(rv, 0.9 + 0.1 * x.var(axis=0, ddof=1))

    def test_training_output_is_standardized(self):
        rng = np.random.default_rng(1)
        x = rng.normal(2.0, 3.0, size=(16, 3))
        y = batch_norm(x, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), training=True).value
        assert np.allclose(y.mean(axis=0), 0.0, atol=1e-12)

    def test_eval_is_independent_of_batch_composition(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(5, 3))
        gamma, beta = rng.uniform(0.5, 1.5, 3), rng.normal(size=3)
        rm, rv = rng.normal(size=3), rng.uniform(0.5, 2.0, 3)
        batched = batch_norm(x, gamma, beta, rm, rv, training=False).value
        for i in range(5):
            single = batch_norm(x[i : i + 1], gamma, beta, rm, rv, training=False).value
            assert np.array_equal(single[0], batched[i])

    def test_eval_leaves_running_statistics_alone(self):
        rm, rv = np.array([0.5]), np.array([2.0])
        batch_norm(np.ones((3, 1)), np.ones(1), np.zeros(1), rm, rv, training=False)
        assert rm[0] == 0.5 and rv[0] == 2.0


def test_tensor_item_requires_single_element():
    with pytest.raises(ShapeError, match="single-element"):
        Tensor(np.ones(2)).item()
