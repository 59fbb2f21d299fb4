"""
Reverse-mode automatic differentiation over float64 numpy arrays, the Adam
optimizer, and the parameter checkpoint format.
"""

from .checkpoint import read_header, read_params, write_params
from .gradcheck import grad_check
from .ops import (
    TensorLike,
    add,
    as_tensor,
    batch_norm,
    concat,
    cosine_similarity,
    detach,
    exp,
    l2_normalize,
    log,
    log_softmax,
    matmul,
    max_over_axis,
    mean,
    mul,
    neg,
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
from .params import AdamSettings, BoundParams, ParamStore, adam_step
from .tensor import NonFiniteError, ShapeError, Tape, Tensor, ZeroNormError, backward

__all__ = [
    # tape
    "Tensor",
    "Tape",
    "backward",
    "ShapeError",
    "NonFiniteError",
    "ZeroNormError",
    # ops
    "TensorLike",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "detach",
    "relu",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "smooth_l1",
    "softmax",
    "log_softmax",
    "l2_normalize",
    "cosine_similarity",
    "batch_norm",
    "sum_",
    "mean",
    "max_over_axis",
    "pick",
    # parameters and optimizer
    "ParamStore",
    "BoundParams",
    "AdamSettings",
    "adam_step",
    # checking
    "grad_check",
    # checkpoint I/O
    "write_params",
    "read_params",
    "read_header",
]
