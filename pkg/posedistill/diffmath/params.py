"""
Named trainable parameters, their groups and buffers, and the Adam optimizer.

Parameters are organised into groups (``teacher.fusenet``,
``student.head_stack``, ...). Freezing is per group: a frozen parameter is
bound as a constant, so no gradient is produced for it, and ``adam_step``
never touches it even when a gradient is supplied.

Buffers are non-trainable arrays (batch-norm running statistics) updated
in place by forward passes in training mode.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tape, Tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamSettings:
    """Adam coefficients. The learning rate is passed per step."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        for name, val in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not (0.0 <= val < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {val}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


class ParamStore:
    """
    Mutable store of parameters, buffers and per-parameter Adam state.

    One writer at a time: ``adam_step`` and training-mode forwards mutate the
    store in place.
    """

    def __init__(self) -> None:
        self._values: dict[str, np.ndarray] = {}
        self._group_of: dict[str, str] = {}
        self._frozen_groups: set[str] = set()
        self._buffers: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t: dict[str, int] = {}

    # ── Registration ──────────────────────────────────────────────────────────

    def add(self, name: str, value: np.ndarray, group: str) -> None:
        if name in self._values or name in self._buffers:
            raise ValueError(f"parameter {name!r} is already registered")
        arr = np.array(value, dtype=np.float64)
        self._values[name] = arr
        self._group_of[name] = group
        self._m[name] = np.zeros_like(arr)
        self._v[name] = np.zeros_like(arr)
        self._t[name] = 0

    def add_buffer(self, name: str, value: np.ndarray) -> None:
        if name in self._values or name in self._buffers:
            raise ValueError(f"buffer {name!r} is already registered")
        self._buffers[name] = np.array(value, dtype=np.float64)

    # ── Queries ───────────────────────────────────────────────────────────────

    def __contains__(self, name: object) -> bool:
        return name in self._values

    def __len__(self) -> int:
        return len(self._values)

    @property
    def names(self) -> list[str]:
        return list(self._values)

    @property
    def buffer_names(self) -> list[str]:
        return list(self._buffers)

    @property
    def groups(self) -> list[str]:
        return list(dict.fromkeys(self._group_of.values()))

    def group_of(self, name: str) -> str:
        return self._group_of[name]

    def names_in(self, group: str) -> list[str]:
        return [n for n, g in self._group_of.items() if g == group]

    def value(self, name: str) -> np.ndarray:
        """The live array; callers must not mutate it."""
        return self._values[name]

    def buffer(self, name: str) -> np.ndarray:
        """The live buffer array, mutated in place by training-mode forwards."""
        return self._buffers[name]

    def set_value(self, name: str, value: np.ndarray) -> None:
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != self._values[name].shape:
            raise ShapeError(
                f"{name}: value shape {arr.shape} != parameter shape {self._values[name].shape}"
            )
        self._values[name][...] = arr

    def adam_state(self, name: str) -> tuple[np.ndarray, np.ndarray, int]:
        return self._m[name], self._v[name], self._t[name]

    def set_adam_state(self, name: str, m: np.ndarray, v: np.ndarray, t: int) -> None:
        shape = self._values[name].shape
        if m.shape != shape or v.shape != shape:
            raise ShapeError(f"{name}: Adam moment shapes must equal {shape}")
        if t < 0:
            raise ValueError(f"{name}: step count must be >= 0, got {t}")
        self._m[name] = np.array(m, dtype=np.float64)
        self._v[name] = np.array(v, dtype=np.float64)
        self._t[name] = int(t)

    def snapshot(self, group: str | None = None) -> dict[str, np.ndarray]:
        """Copies of parameter values, optionally restricted to one group."""
        names = self.names if group is None else self.names_in(group)
        return {n: self._values[n].copy() for n in names}

    # ── Freezing ──────────────────────────────────────────────────────────────

    def _check_groups(self, groups: Iterable[str]) -> list[str]:
        requested = list(groups)
        known = set(self._group_of.values())
        unknown = [g for g in requested if g not in known]
        if unknown:
            raise ValueError(f"unknown parameter group(s): {', '.join(unknown)}")
        return requested

    def freeze(self, groups: Iterable[str]) -> None:
        self._frozen_groups.update(self._check_groups(groups))

    def unfreeze(self, groups: Iterable[str]) -> None:
        self._frozen_groups.difference_update(self._check_groups(groups))

    def is_frozen(self, name: str) -> bool:
        return self._group_of[name] in self._frozen_groups

    def group_frozen(self, group: str) -> bool:
        return group in self._frozen_groups

    @property
    def frozen_groups(self) -> list[str]:
        return sorted(self._frozen_groups)

    def reset_optimizer(self) -> None:
        """Zero all Adam moments and step counts."""
        for name, arr in self._values.items():
            self._m[name] = np.zeros_like(arr)
            self._v[name] = np.zeros_like(arr)
            self._t[name] = 0

    # ── Binding ───────────────────────────────────────────────────────────────

    def bind(self, tape: Tape | None) -> BoundParams:
        return BoundParams(self, tape)


class BoundParams:
    """
    Parameter view for one forward pass.

    Trainable parameters are watched on the tape the first time they are
    read; frozen parameters, and all parameters when the tape is None, are
    read as constants.
    """

    def __init__(self, store: ParamStore, tape: Tape | None) -> None:
        self.store = store
        self.tape = tape
        self._bound: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        cached = self._bound.get(name)
        if cached is not None:
            return cached
        value = self.store.value(name)
        if self.tape is None or self.store.is_frozen(name):
            t = Tensor(value)
        else:
            t = self.tape.watch(name, value)
        self._bound[name] = t
        return t

    def buffer(self, name: str) -> np.ndarray:
        return self.store.buffer(name)


def adam_step(
    store: ParamStore,
    grads: Mapping[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """
    Apply one bias-corrected Adam update per supplied gradient.

    Frozen parameters are skipped. Parameters absent from *grads* keep their
    values, moments and step counts.

    Raises
    ------
    KeyError
        If a gradient names an unregistered parameter.
    ShapeError
        If a gradient's shape differs from its parameter's.
    """
    settings = AdamSettings(beta1=beta1, beta2=beta2, eps=eps)
    for name in grads:
        if name not in store:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != store.value(name).shape:
            raise ShapeError(
                f"{name}: gradient shape {g.shape} != parameter shape {store.value(name).shape}"
            )

    for name, grad in grads.items():
        if store.is_frozen(name):
            continue
        g = np.asarray(grad, dtype=np.float64)
        m, v, t = store.adam_state(name)
        t += 1
        m = settings.beta1 * m + (1.0 - settings.beta1) * g
        v = settings.beta2 * v + (1.0 - settings.beta2) * (g * g)
        m_hat = m / (1.0 - settings.beta1**t)
        v_hat = v / (1.0 - settings.beta2**t)
        store.set_adam_state(name, m, v, t)
        store.set_value(name, store.value(name) - lr * m_hat / (np.sqrt(v_hat) + settings.eps))
    logger.debug("adam step over %d gradients at lr=%g", len(grads), lr)
