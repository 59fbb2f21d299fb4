"""Tests for ParamStore binding, freezing, Adam, grad_check and checkpoint I/O."""

import json

import numpy as np
import pytest

from posedistill.diffmath import (
    ParamStore,
    ShapeError,
    Tape,
    adam_step,
    backward,
    grad_check,
    log_softmax,
    matmul,
    mul,
    neg,
    pick,
    read_header,
    read_params,
    sum_,
    write_params,
)
from posedistill.errors import CheckpointError


def _store():
    store = ParamStore()
    store.add("enc.w", np.arange(6.0).reshape(2, 3), "encoder")
    store.add("enc.b", np.zeros(3), "encoder")
    store.add("head.w", np.ones((3, 2)), "head")
    store.add_buffer("enc.bn.mean", np.array([0.5, -0.5, 0.0]))
    return store


class TestParamStore:
    def test_groups_in_registration_order(self):
        assert _store().groups == ["encoder", "head"]

    def test_duplicate_name(self):
        store = _store()
        with pytest.raises(ValueError, match="already registered"):
            store.add("enc.w", np.zeros(1), "encoder")

    def test_unknown_group_on_freeze(self):
        with pytest.raises(ValueError, match="unknown parameter group"):
            _store().freeze(["decoder"])

    def test_bind_watches_trainable_only(self):
        store = _store()
        store.freeze(["head"])
        tape = Tape()
        bound = store.bind(tape)
        assert bound["enc.w"].tape is tape
        assert bound["head.w"].tape is None
        assert bound["enc.w"] is bound["enc.w"]

    def test_bind_without_tape_is_constant(self):
        bound = _store().bind(None)
        assert bound["enc.w"].tape is None

    def test_unfreeze(self):
        store = _store()
        store.freeze(["head"])
        store.unfreeze(["head"])
        assert not store.is_frozen("head.w")

    def test_set_value_shape_mismatch(self):
        with pytest.raises(ShapeError):
            _store().set_value("enc.b", np.zeros(4))


class TestAdam:
    def test_first_step_on_square(self):
        store = ParamStore()
        store.add("x", np.array(1.0), "g")
        tape = Tape()
        x = store.bind(tape)["x"]
        grads = backward(tape, mul(x, x))
        adam_step(store, grads, lr=0.1)
        assert float(store.value("x")) == pytest.approx(0.9, abs=1e-6)
        assert store.adam_state("x")[2] == 1

    def test_zero_gradient_leaves_parameter(self):
        store = _store()
        before = store.snapshot()
        adam_step(store, {"enc.w": np.zeros((2, 3))}, lr=0.1)
        assert np.array_equal(store.value("enc.w"), before["enc.w"])

    def test_frozen_parameter_never_moves(self):
        store = _store()
        store.freeze(["head"])
        before = store.value("head.w").copy()
        for _ in range(5):
            adam_step(store, {"head.w": np.ones((3, 2)), "enc.b": np.ones(3)}, lr=0.1)
        assert np.array_equal(store.value("head.w"), before)
        assert store.adam_state("head.w")[2] == 0
        assert store.adam_state("enc.b")[2] == 5

    def test_unknown_gradient_name(self):
        with pytest.raises(KeyError, match="unknown parameter"):
            adam_step(_store(), {"nope": np.zeros(1)}, lr=0.1)

    def test_gradient_shape_mismatch(self):
        with pytest.raises(ShapeError, match="gradient shape"):
            adam_step(_store(), {"enc.b": np.zeros(4)}, lr=0.1)

    def test_minimizes_quadratic(self):
        store = ParamStore()
        store.add("x", np.array([3.0, -2.0]), "g")
        for _ in range(500):
            tape = Tape()
            x = store.bind(tape)["x"]
            adam_step(store, backward(tape, sum_(mul(x, x))), lr=0.05)
        assert np.all(np.abs(store.value("x")) < 0.1)

    def test_reset_optimizer(self):
        store = _store()
        adam_step(store, {"enc.b": np.ones(3)}, lr=0.1)
        store.reset_optimizer()
        m, v, t = store.adam_state("enc.b")
        assert t == 0 and not m.any() and not v.any()


class TestGradCheck:
    def test_quadratic_form(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 4))

        def fn(t):
            return sum_(mul(matmul(t["x"], a), t["x"]))

        assert grad_check(fn, {"x": rng.normal(size=(1, 4))}) < 1e-9

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 6, size=5)

        def fn(t):
            return neg(sum_(pick(log_softmax(t["logits"], axis=1), labels)))

        assert grad_check(fn, {"logits": rng.normal(size=(5, 6))}) < 1e-4


class TestCheckpoint:
    def test_round_trip_is_bitwise(self, tmp_path):
        store = _store()
        store.freeze(["head"])
        adam_step(store, {"enc.w": np.full((2, 3), 0.3)}, lr=0.01)
        write_params(store, tmp_path, {"epoch": 3})
        loaded, header = read_params(tmp_path)
        assert header == {"epoch": 3}
        assert loaded.names == store.names
        for name in store.names:
            assert np.array_equal(loaded.value(name), store.value(name))
            assert loaded.group_of(name) == store.group_of(name)
            for a, b in zip(loaded.adam_state(name)[:2], store.adam_state(name)[:2]):
                assert np.array_equal(a, b)
            assert loaded.adam_state(name)[2] == store.adam_state(name)[2]
        assert np.array_equal(loaded.buffer("enc.bn.mean"), store.buffer("enc.bn.mean"))
        assert loaded.is_frozen("head.w")

    def test_read_header_only(self, tmp_path):
        write_params(_store(), tmp_path, {"kind": "teacher"})
        assert read_header(tmp_path) == {"kind": "teacher"}

    def test_missing_directory(self, tmp_path):
        with pytest.raises(CheckpointError, match="no checkpoint"):
            read_params(tmp_path / "absent")

    def test_wrong_format_tag(self, tmp_path):
        write_params(_store(), tmp_path)
        path = tmp_path / "checkpoint.json"
        manifest = json.loads(path.read_text())
        manifest["format"] = "something-else"
        path.write_text(json.dumps(manifest))
        with pytest.raises(CheckpointError, match="not a"):
            read_params(tmp_path)

    def test_truncated_blob(self, tmp_path):
        write_params(_store(), tmp_path)
        blob = tmp_path / "params.bin"
        blob.write_bytes(blob.read_bytes()[:-8])
        with pytest.raises(CheckpointError, match="expected"):
            read_params(tmp_path)

    def test_checksum_mismatch(self, tmp_path):
        write_params(_store(), tmp_path)
        blob = tmp_path / "params.bin"
        data = bytearray(blob.read_bytes())
        data[0] ^= 0xFF
        blob.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="CRC32"):
            read_params(tmp_path)

    def test_blob_is_little_endian_float64(self, tmp_path):
        store = ParamStore()
        store.add("x", np.array([1.5, -2.0]), "g")
        write_params(store, tmp_path, include_optimizer=False)
        raw = (tmp_path / "params.bin").read_bytes()
        assert np.array_equal(np.frombuffer(raw, dtype="<f8"), [1.5, -2.0])
