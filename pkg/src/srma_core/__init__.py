"""SRMA Core Component

Minimal reverse-mode differentiable computation core used by the sequential
recommendation models: numpy-backed tensors with backward passes, labelled
seeded random streams, a named parameter store, Adam, finite-difference
gradient checks and the ``SRMA1`` checkpoint format.

Example:
    from srma_core import ParamStore, AdamState, adam_step, sum_, mul

    params = ParamStore()
    w = params.add("w", [1.0, 2.0])
    loss = sum_(mul(w, w))
    loss.backward()
    adam_step(params, AdamState(lr=0.1))
"""

from . import checkpoint
from .checkpoint import load_params, save_params
from .exceptions import (
    CheckpointError,
    DiffCoreError,
    GradCheckError,
    IndexOutOfRangeError,
    InvalidArgumentError,
    MissingGradientError,
    NonFiniteError,
    ParameterError,
    ShapeError,
)
from .gradcheck import GradCheckReport, check_ops, grad_check, grad_check_params
from .optim import AdamState, adam_step, clip_grad_norm
from .params import ParamStore
from .rng import RngStream
from .tensor import (
    Tensor,
    add,
    default_dtype,
    dropout,
    embedding_lookup,
    exp,
    gelu,
    index,
    is_grad_enabled,
    layer_norm,
    log,
    log_sigmoid,
    logsumexp,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    precision,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax_rows,
    stack,
    sub,
    sum_,
    swapaxes,
    tanh,
)

__version__ = "0.1.0"

__all__ = [
    # Tensors and ops
    "Tensor",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "exp",
    "log",
    "sigmoid",
    "log_sigmoid",
    "tanh",
    "relu",
    "gelu",
    "sum_",
    "mean",
    "logsumexp",
    "softmax_rows",
    "layer_norm",
    "matmul",
    "reshape",
    "swapaxes",
    "index",
    "stack",
    "embedding_lookup",
    "dropout",

    # Modes
    "no_grad",
    "precision",
    "default_dtype",
    "is_grad_enabled",

    # Randomness, parameters, optimisation
    "RngStream",
    "ParamStore",
    "AdamState",
    "adam_step",
    "clip_grad_norm",

    # Checkpoints
    "checkpoint",
    "save_params",
    "load_params",

    # Verification
    "GradCheckReport",
    "check_ops",
    "grad_check",
    "grad_check_params",

    # Exceptions
    "DiffCoreError",
    "InvalidArgumentError",
    "ShapeError",
    "NonFiniteError",
    "IndexOutOfRangeError",
    "ParameterError",
    "MissingGradientError",
    "CheckpointError",
    "GradCheckError",
]
