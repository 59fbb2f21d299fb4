"""Central finite-difference check of tape gradients."""

from __future__ import annotations

from collections.abc import Callable, Mapping

import numpy as np

from .tensor import Tape, Tensor, backward

_REL_FLOOR = 1e-8


def grad_check(
    fn: Callable[[Mapping[str, Tensor]], Tensor],
    inputs: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """
    Compare reverse-mode gradients of a scalar *fn* with central differences.

    *fn* receives a mapping name → Tensor and must return a single-element
    Tensor. Returns the maximum over all input coordinates of
    ``|analytic − numeric| / max(1e-8, |analytic| + |numeric|)``.
    """
    base = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}

    tape = Tape()
    watched = {k: tape.watch(k, v) for k, v in base.items()}
    analytic = backward(tape, fn(watched))

    worst = 0.0
    for name, arr in base.items():
        flat = arr.reshape(-1)
        grad = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            plus = fn({k: Tensor(v) for k, v in base.items()}).item()
            flat[i] = orig - epsilon
            minus = fn({k: Tensor(v) for k, v in base.items()}).item()
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * epsilon)
            denom = max(_REL_FLOOR, abs(grad[i]) + abs(numeric))
            worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
