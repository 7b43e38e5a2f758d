"""Adam optimizer with bias correction, and global-norm gradient clipping."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import numpy.typing as npt

from .exceptions import InvalidArgumentError, MissingGradientError
from .params import ParamStore

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment estimates and hyper-parameters for Adam.

    Args:
        lr: Learning rate (default: 1e-3)
        beta1: First-moment decay (default: 0.9)
        beta2: Second-moment decay (default: 0.999)
        eps: Denominator guard (default: 1e-8)
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, npt.NDArray[Any]] = field(default_factory=dict)
    second_moment: Dict[str, npt.NDArray[Any]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate hyper-parameters after initialization."""
        if self.lr <= 0:
            raise InvalidArgumentError("Learning rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidArgumentError("Adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise InvalidArgumentError("Adam eps must be positive")


def adam_step(params: ParamStore, state: AdamState) -> ParamStore:
    """Apply one bias-corrected Adam update to every trainable parameter.

    Frozen parameters are left untouched. Gradients are zeroed afterwards.

    Raises:
        MissingGradientError: If a trainable parameter has no gradient
    """
    trainable = params.trainable_items()
    for name, tensor in trainable:
        if tensor.grad is None:
            raise MissingGradientError(f"No gradient for trainable parameter {name}")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, tensor in trainable:
        assert tensor.grad is not None
        grad = tensor.grad.astype(tensor.dtype, copy=False)
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m = np.zeros_like(tensor.values)
            v = np.zeros_like(tensor.values)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        tensor.values = (tensor.values - update).astype(tensor.dtype, copy=False)
        state.first_moment[name] = m
        state.second_moment[name] = v

    params.zero_grad()
    return params


def clip_grad_norm(params: ParamStore, max_norm: float) -> float:
    """Rescale trainable gradients so their global L2 norm is at most ``max_norm``.

    Returns:
        float: The norm before clipping
    """
    if max_norm <= 0:
        raise InvalidArgumentError("max_norm must be positive")
    grads = [t.grad for _, t in params.trainable_items() if t.grad is not None]
    total = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))
    if total > max_norm:
        factor = max_norm / (total + 1e-6)
        for _, tensor in params.trainable_items():
            if tensor.grad is not None:
                tensor.grad = (tensor.grad * factor).astype(tensor.dtype, copy=False)
        logger.debug(f"Clipped gradient norm {total:.4f} to {max_norm}")
    return total
