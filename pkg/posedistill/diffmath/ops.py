"""
Differentiable primitives over float64 Tensors.

Shape rules are broadcasting-free with one exception: the second operand
of an elementwise binary op may be a scalar or match a trailing suffix of
the first operand's shape (a bias row added to a batch). Every forward
value is checked for finiteness.

Each op returns a constant Tensor when no input is on a tape, so the same
code path serves training (recorded) and inference (unrecorded).
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .tensor import VJP, ShapeError, Tape, Tensor, ZeroNormError, check_finite

TensorLike = Tensor | np.ndarray | float

_BN_MIN_BATCH = 2


# ── Plumbing ──────────────────────────────────────────────────────────────────


def as_tensor(x: TensorLike) -> Tensor:
    """Pass Tensors through; wrap anything else as a constant."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(op: str, value: np.ndarray, inputs: Sequence[Tensor], vjp: VJP) -> Tensor:
    check_finite(value, op)
    tape: Tape | None = next((t.tape for t in inputs if t.tape is not None), None)
    if tape is None:
        return Tensor(value)
    return tape.record(value, inputs, vjp)


def _suffix_compatible(big: tuple[int, ...], small: tuple[int, ...]) -> bool:
    if small == ():
        return True
    return len(small) <= len(big) and big[len(big) - len(small) :] == small


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    return g.reshape((-1, *shape)).sum(axis=0)


def _binary_shapes(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    if _suffix_compatible(a.shape, b.shape):
        return a.shape
    if _suffix_compatible(b.shape, a.shape):
        return b.shape
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# ── Elementwise arithmetic ────────────────────────────────────────────────────


def add(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _binary_shapes("add", ta, tb)
    sa, sb = ta.shape, tb.shape
    return _emit(
        "add",
        ta.value + tb.value,
        (ta, tb),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _binary_shapes("sub", ta, tb)
    sa, sb = ta.shape, tb.shape
    return _emit(
        "sub",
        ta.value - tb.value,
        (ta, tb),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
    )


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _binary_shapes("mul", ta, tb)
    av, bv = ta.value, tb.value
    return _emit(
        "mul",
        av * bv,
        (ta, tb),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def scale(x: TensorLike, factor: float) -> Tensor:
    """Multiply by a Python float constant."""
    tx = as_tensor(x)
    c = float(factor)
    return _emit("scale", tx.value * c, (tx,), lambda g: (g * c,))


def neg(x: TensorLike) -> Tensor:
    return scale(x, -1.0)


# ── Linear algebra and shape ──────────────────────────────────────────────────


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """(m, k) @ (k, n) → (m, n)."""
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.ndim != 2 or tb.ndim != 2 or ta.shape[1] != tb.shape[0]:
        raise ShapeError(f"matmul: expected (m, k) @ (k, n), got {ta.shape} @ {tb.shape}")
    av, bv = ta.value, tb.value
    return _emit("matmul", av @ bv, (ta, tb), lambda g: (g @ bv.T, av.T @ g))


def transpose(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    if tx.ndim != 2:
        raise ShapeError(f"transpose: expected a 2-D tensor, got shape {tx.shape}")
    return _emit("transpose", tx.value.T.copy(), (tx,), lambda g: (g.T,))


def reshape(x: TensorLike, shape: Sequence[int]) -> Tensor:
    tx = as_tensor(x)
    src = tx.shape
    try:
        out = tx.value.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {src} as {tuple(shape)}") from exc
    return _emit("reshape", out, (tx,), lambda g: (g.reshape(src),))


def concat(tensors: Sequence[TensorLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat: needs at least one tensor")
    try:
        out = np.concatenate([p.value for p in parts], axis=axis)
    except ValueError as exc:
        shapes = [p.shape for p in parts]
        raise ShapeError(f"concat: incompatible shapes {shapes} on axis {axis}") from exc
    cuts = np.cumsum([p.value.shape[axis] for p in parts])[:-1]

    def vjp(g: np.ndarray) -> list[np.ndarray]:
        return list(np.split(g, cuts, axis=axis))

    return _emit("concat", out, parts, vjp)


def detach(x: TensorLike) -> Tensor:
    """Same value, no gradient path."""
    return Tensor(as_tensor(x).value.copy())


# ── Nonlinearities ────────────────────────────────────────────────────────────


def relu(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    mask = tx.value > 0.0
    return _emit("relu", np.where(mask, tx.value, 0.0), (tx,), lambda g: (g * mask,))


def tanh(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    y = np.tanh(tx.value)
    return _emit("tanh", y, (tx,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    # tanh form never overflows
    y = 0.5 * (1.0 + np.tanh(0.5 * tx.value))
    return _emit("sigmoid", y, (tx,), lambda g: (g * y * (1.0 - y),))


def exp(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    with np.errstate(over="ignore"):
        y = np.exp(tx.value)
    return _emit("exp", y, (tx,), lambda g: (g * y,))


def log(x: TensorLike) -> Tensor:
    tx = as_tensor(x)
    xv = tx.value
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(xv)
    return _emit("log", y, (tx,), lambda g: (g / xv,))


def smooth_l1(x: TensorLike) -> Tensor:
    """0.5·x² where |x| < 1, |x| − 0.5 elsewhere."""
    tx = as_tensor(x)
    xv = tx.value
    inner = np.abs(xv) < 1.0
    y = np.where(inner, 0.5 * xv * xv, np.abs(xv) - 0.5)
    return _emit("smooth_l1", y, (tx,), lambda g: (g * np.where(inner, xv, np.sign(xv)),))


# ── Normalizations ────────────────────────────────────────────────────────────


def softmax(x: TensorLike, axis: int = -1) -> Tensor:
    tx = as_tensor(x)
    shifted = tx.value - tx.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    return _emit(
        "softmax",
        y,
        (tx,),
        lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),),
    )


def log_softmax(x: TensorLike, axis: int = -1) -> Tensor:
    tx = as_tensor(x)
    shifted = tx.value - tx.value.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    p = np.exp(y)
    return _emit(
        "log_softmax",
        y,
        (tx,),
        lambda g: (g - p * g.sum(axis=axis, keepdims=True),),
    )


def l2_normalize(x: TensorLike, axis: int = -1) -> Tensor:
    """
    Scale each slice along *axis* to unit Euclidean length.

    Raises
    ------
    ZeroNormError
        If any slice has zero length.
    """
    tx = as_tensor(x)
    norm = np.sqrt((tx.value * tx.value).sum(axis=axis, keepdims=True))
    if np.any(norm == 0.0):
        raise ZeroNormError("l2_normalize: a row has zero norm")
    y = tx.value / norm
    return _emit(
        "l2_normalize",
        y,
        (tx,),
        lambda g: ((g - y * (g * y).sum(axis=axis, keepdims=True)) / norm,),
    )


def cosine_similarity(a: TensorLike, b: TensorLike) -> Tensor:
    """
    Cosine similarity.

    For two vectors of equal length the result is a scalar. For (N, E) and
    (M, E) matrices it is the (N, M) matrix of row-pair similarities.
    """
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.ndim == 1 and tb.ndim == 1:
        if ta.shape != tb.shape:
            raise ShapeError(f"cosine_similarity: vector lengths differ, {ta.shape} vs {tb.shape}")
        return sum_(mul(l2_normalize(ta), l2_normalize(tb)))
    if ta.ndim != 2 or tb.ndim != 2 or ta.shape[1] != tb.shape[1]:
        raise ShapeError(
            f"cosine_similarity: expected (N, E) and (M, E), got {ta.shape} and {tb.shape}"
        )
    return matmul(l2_normalize(ta, axis=1), transpose(l2_normalize(tb, axis=1)))


def batch_norm(
    x: TensorLike,
    gamma: TensorLike,
    beta: TensorLike,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    *,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Per-feature batch normalization of an (N, F) batch.

    Training mode normalizes with the batch mean and biased variance and
    updates ``running_mean``/``running_var`` in place (the variance update
    uses the unbiased estimate). Eval mode is the fixed affine map given by
    the running statistics.

    Raises
    ------
    ShapeError
        On a non-2-D input, parameter widths that differ from F, or a
        training batch with fewer than two rows.
    """
    tx, tg, tb = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if tx.ndim != 2:
        raise ShapeError(f"batch_norm: expected (N, F), got {tx.shape}")
    n, f = tx.shape
    for label, shape in (("gamma", tg.shape), ("beta", tb.shape)):
        if shape != (f,):
            raise ShapeError(f"batch_norm: {label} must have shape ({f},), got {shape}")
    if running_mean.shape != (f,) or running_var.shape != (f,):
        raise ShapeError(f"batch_norm: running statistics must have shape ({f},)")

    xv, gv = tx.value, tg.value
    if training:
        if n < _BN_MIN_BATCH:
            raise ShapeError(f"batch_norm: training needs a batch of at least 2, got {n}")
        mu = xv.mean(axis=0)
        var = xv.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (xv - mu) * inv_std
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (n / (n - 1))

        def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            dxhat = g * gv
            dx = (
                inv_std
                / n
                * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
            )
            return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (xv - running_mean) * inv_std

        def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            return g * gv * inv_std, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _emit("batch_norm", gv * xhat + tb.value, (tx, tg, tb), vjp)


# ── Reductions and indexing ───────────────────────────────────────────────────


def sum_(x: TensorLike, axis: int | None = None) -> Tensor:
    tx = as_tensor(x)
    src = tx.shape

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is None:
            return (np.broadcast_to(g, src).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), src).copy(),)

    return _emit("sum", np.asarray(tx.value.sum(axis=axis)), (tx,), vjp)


def mean(x: TensorLike, axis: int | None = None) -> Tensor:
    tx = as_tensor(x)
    count = tx.size if axis is None else tx.shape[axis]
    if count == 0:
        raise ShapeError("mean: reduction over an empty axis")
    return scale(sum_(tx, axis=axis), 1.0 / count)


def max_over_axis(x: TensorLike, axis: int) -> Tensor:
    """Maximum along *axis*; the gradient goes to the first maximal entry."""
    tx = as_tensor(x)
    xv = tx.value
    idx = np.expand_dims(np.argmax(xv, axis=axis), axis)
    y = np.take_along_axis(xv, idx, axis=axis).squeeze(axis)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        dx = np.zeros_like(xv)
        np.put_along_axis(dx, idx, np.expand_dims(g, axis), axis=axis)
        return (dx,)

    return _emit("max_over_axis", y, (tx,), vjp)


def pick(x: TensorLike, indices: np.ndarray) -> Tensor:
    """Row-wise gather: out[i] = x[i, indices[i]] for an (N, K) tensor."""
    tx = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)
    if tx.ndim != 2 or idx.shape != (tx.shape[0],):
        raise ShapeError(f"pick: expected (N, K) and (N,), got {tx.shape} and {idx.shape}")
    if np.any(idx < 0) or np.any(idx >= tx.shape[1]):
        raise ShapeError(f"pick: indices must lie in [0, {tx.shape[1]})")
    rows = np.arange(tx.shape[0])
    src = tx.shape

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        dx = np.zeros(src)
        dx[rows, idx] = g
        return (dx,)

    return _emit("pick", tx.value[rows, idx], (tx,), vjp)
