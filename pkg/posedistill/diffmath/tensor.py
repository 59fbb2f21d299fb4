"""
Dense float64 tensors and the reverse-mode differentiation tape.

A Tape is an append-only list of nodes. Leaves are parameters registered by
name with ``Tape.watch``; every primitive op in ``diffmath.ops`` appends one
node holding its input node ids and a vector-Jacobian product closure.
Because nodes are appended only after their inputs exist, the list is
already in topological order and ``backward`` visits each node once, in
reverse.

Tensors created without a tape (or from inputs that have none) are
constants: ops on them compute values but record nothing.

A Tape is single-threaded. Distinct tapes may live on distinct threads.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from posedistill.errors import NumericalError, PosedistillError

VJP = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class ShapeError(PosedistillError, ValueError):
    """Operands have incompatible shapes for the requested op."""


class NonFiniteError(NumericalError):
    """A forward value contains NaN or Inf."""


class ZeroNormError(PosedistillError, ValueError):
    """A row that must be normalized has zero length."""


class Tensor:
    """
    A float64 array, optionally bound to a node of a Tape.

    ``value`` is the forward array. ``tape``/``node`` are set only for
    tensors recorded on a tape; ``name`` is set only for watched leaves.
    """

    __slots__ = ("value", "tape", "node", "name")

    def __init__(
        self,
        value: np.ndarray | float | Sequence[float],
        tape: Tape | None = None,
        node: int = -1,
        name: str | None = None,
    ) -> None:
        self.value: np.ndarray = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.node = node
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.value.shape)

    @property
    def ndim(self) -> int:
        return int(self.value.ndim)

    @property
    def size(self) -> int:
        return int(self.value.size)

    @property
    def on_tape(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.value.reshape(()))

    def numpy(self) -> np.ndarray:
        """A copy of the forward value."""
        return self.value.copy()

    def __repr__(self) -> str:
        where = f"node={self.node}" if self.tape is not None else "constant"
        return f"Tensor(shape={self.shape}, {where})"


@dataclass(frozen=True)
class _Node:
    inputs: tuple[int, ...]  # -1 marks a constant input
    vjp: VJP | None  # None for leaves
    shape: tuple[int, ...]


class Tape:
    """Ordered record of forward ops for one differentiation pass."""

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self._leaves: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def leaves(self) -> dict[str, int]:
        """Watched leaf name → node id."""
        return dict(self._leaves)

    def watch(self, name: str, value: np.ndarray) -> Tensor:
        """Register *value* as a named leaf whose gradient backward() returns."""
        if name in self._leaves:
            raise ValueError(f"leaf {name!r} is already watched on this tape")
        arr = np.asarray(value, dtype=np.float64)
        node_id = len(self.nodes)
        self.nodes.append(_Node(inputs=(), vjp=None, shape=tuple(arr.shape)))
        self._leaves[name] = node_id
        return Tensor(arr, tape=self, node=node_id, name=name)

    def record(self, value: np.ndarray, inputs: Sequence[Tensor], vjp: VJP) -> Tensor:
        """Append an op node; inputs not on this tape are recorded as constants."""
        ids: list[int] = []
        for t in inputs:
            if t.tape is None:
                ids.append(-1)
            elif t.tape is self:
                ids.append(t.node)
            else:
                raise ValueError("cannot combine tensors recorded on different tapes")
        node_id = len(self.nodes)
        self.nodes.append(_Node(inputs=tuple(ids), vjp=vjp, shape=tuple(value.shape)))
        return Tensor(value, tape=self, node=node_id)


def backward(tape: Tape, root: Tensor) -> dict[str, np.ndarray]:
    """
    Reverse-accumulate d(root)/d(leaf) for every watched leaf of *tape*.

    Leaves that root does not depend on get zero gradients of their own
    shape.

    Raises
    ------
    ShapeError
        If *root* is not a single-element tensor recorded on *tape*.
    """
    if root.tape is not tape:
        raise ShapeError("backward root must be recorded on the given tape")
    if root.size != 1:
        raise ShapeError(f"backward root must be scalar, got shape {root.shape}")

    grads: list[np.ndarray | None] = [None] * len(tape.nodes)
    grads[root.node] = np.ones(root.shape, dtype=np.float64)

    for idx in range(root.node, -1, -1):
        g = grads[idx]
        if g is None:
            continue
        node = tape.nodes[idx]
        if node.vjp is None:
            continue
        for inp, gi in zip(node.inputs, node.vjp(g)):
            if inp < 0 or gi is None:
                continue
            prev = grads[inp]
            grads[inp] = gi if prev is None else prev + gi

    result: dict[str, np.ndarray] = {}
    for name, node_id in tape.leaves.items():
        g = grads[node_id]
        result[name] = (
            np.zeros(tape.nodes[node_id].shape, dtype=np.float64)
            if g is None
            else np.asarray(g, dtype=np.float64).reshape(tape.nodes[node_id].shape)
        )
    return result


def check_finite(value: np.ndarray, op: str) -> np.ndarray:
    """Return *value* unchanged, or raise NonFiniteError naming *op*."""
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite value produced by {op}")
    return value
