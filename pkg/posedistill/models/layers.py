"""
Layer building blocks over a ParamStore.

Each block has an ``init_*`` function that registers its parameters under
a dotted prefix and a forward function that reads them back from a
BoundParams view. Keeping the two separate lets a checkpoint rebuild the
store without re-running any initializer.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from posedistill.diffmath import (
    BoundParams,
    ParamStore,
    Tensor,
    TensorLike,
    add,
    batch_norm,
    matmul,
    relu,
)

Activation = Callable[[TensorLike], Tensor]


def init_linear(
    store: ParamStore,
    prefix: str,
    fan_in: int,
    fan_out: int,
    group: str,
    rng: np.random.Generator,
    *,
    gain: float = 2.0,
) -> None:
    """Register ``prefix.w`` (fan_in × fan_out, N(0, gain/fan_in)) and zero ``prefix.b``."""
    std = np.sqrt(gain / fan_in)
    store.add(f"{prefix}.w", rng.normal(0.0, std, size=(fan_in, fan_out)), group)
    store.add(f"{prefix}.b", np.zeros(fan_out), group)


def linear(params: BoundParams, prefix: str, x: TensorLike) -> Tensor:
    return add(matmul(x, params[f"{prefix}.w"]), params[f"{prefix}.b"])


def init_batch_norm(store: ParamStore, prefix: str, width: int, group: str) -> None:
    store.add(f"{prefix}.gamma", np.ones(width), group)
    store.add(f"{prefix}.beta", np.zeros(width), group)
    store.add_buffer(f"{prefix}.running_mean", np.zeros(width))
    store.add_buffer(f"{prefix}.running_var", np.ones(width))


def norm(params: BoundParams, prefix: str, x: TensorLike, *, training: bool) -> Tensor:
    return batch_norm(
        x,
        params[f"{prefix}.gamma"],
        params[f"{prefix}.beta"],
        params.buffer(f"{prefix}.running_mean"),
        params.buffer(f"{prefix}.running_var"),
        training=training,
    )


# ── Multi-layer perceptrons ───────────────────────────────────────────────────


def init_mlp(
    store: ParamStore,
    prefix: str,
    fan_in: int,
    widths: Sequence[int],
    group: str,
    rng: np.random.Generator,
    *,
    batch_norm_layers: bool = False,
    final_gain: float = 2.0,
) -> None:
    """Register ``prefix.l0 … prefix.l{k-1}``; the last layer uses *final_gain*."""
    prev = fan_in
    for i, width in enumerate(widths):
        gain = final_gain if i == len(widths) - 1 else 2.0
        init_linear(store, f"{prefix}.l{i}", prev, width, group, rng, gain=gain)
        if batch_norm_layers:
            init_batch_norm(store, f"{prefix}.bn{i}", width, group)
        prev = width


def mlp(
    params: BoundParams,
    prefix: str,
    x: TensorLike,
    n_layers: int,
    *,
    final: Activation | None = relu,
    batch_norm_layers: bool = False,
    training: bool = False,
) -> Tensor:
    """
    Linear → [batch norm] → ReLU for every layer but the last, whose
    activation is *final* (None leaves it linear).
    """
    out: TensorLike = x
    for i in range(n_layers):
        out = linear(params, f"{prefix}.l{i}", out)
        if batch_norm_layers:
            out = norm(params, f"{prefix}.bn{i}", out, training=training)
        if i < n_layers - 1:
            out = relu(out)
        elif final is not None:
            out = final(out)
    assert isinstance(out, Tensor)
    return out
