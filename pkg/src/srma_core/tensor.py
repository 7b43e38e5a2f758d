"""Reverse-mode differentiable tensors over numpy arrays.

A :class:`Tensor` wraps a dense numpy array. Operations in this module build a
computation graph while gradient recording is enabled; calling
:meth:`Tensor.backward` on a scalar result accumulates gradients into every
leaf tensor that requires them.

Example:
    from srma_core import Tensor, matmul, sum_

    a = Tensor([[1.0, 2.0]], requires_grad=True)
    b = Tensor([[3.0], [4.0]], requires_grad=True)
    loss = sum_(matmul(a, b))
    loss.backward()
    print(a.grad)  # [[3., 4.]]
"""

import contextlib
import logging
import math
import threading
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .exceptions import (
    IndexOutOfRangeError,
    InvalidArgumentError,
    NonFiniteError,
    ShapeError,
)
from .rng import RngStream

logger = logging.getLogger(__name__)

Array = npt.NDArray[Any]
BackwardFn = Callable[[Array], Sequence[Optional[Array]]]
Scalar = Union[int, float]

_GELU_C = math.sqrt(2.0 / math.pi)


class _Mode(threading.local):
    def __init__(self) -> None:
        self.grad_enabled = True
        self.dtype: np.dtype[Any] = np.dtype(np.float32)


_mode = _Mode()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    previous = _mode.grad_enabled
    _mode.grad_enabled = False
    try:
        yield
    finally:
        _mode.grad_enabled = previous


@contextlib.contextmanager
def precision(dtype: Union[str, type, np.dtype[Any]]) -> Iterator[None]:
    """Switch the dtype used for newly created tensors.

    32-bit is the default; gradient checks run under ``precision("float64")``.
    """
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise InvalidArgumentError(f"Unsupported precision: {resolved}")
    previous = _mode.dtype
    _mode.dtype = resolved
    try:
        yield
    finally:
        _mode.dtype = previous


def default_dtype() -> np.dtype[Any]:
    """Get the dtype used for newly created tensors."""
    return _mode.dtype


def is_grad_enabled() -> bool:
    return _mode.grad_enabled


class Tensor:
    """Dense real array with an optional gradient buffer."""

    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward", "_op")

    def __init__(
        self,
        values: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[Union[str, type, np.dtype[Any]]] = None,
    ) -> None:
        array = np.array(values, dtype=np.dtype(dtype) if dtype is not None else default_dtype())
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(f"Tensor {name or ''} initialised with non-finite values")
        self.values: Array = array
        self.grad: Optional[Array] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = "leaf"

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def ndim(self) -> int:
        return int(self.values.ndim)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.values.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self) -> Array:
        """Return a copy of the values."""
        return np.array(self.values, copy=True)

    def detach(self) -> "Tensor":
        return Tensor(self.values, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[Array] = None) -> None:
        """Accumulate gradients of this tensor into every reachable leaf.

        Args:
            grad: Upstream gradient; defaults to ones for a single-element tensor.

        Raises:
            ShapeError: If no upstream gradient is given for a non-scalar tensor
        """
        if not self.requires_grad:
            return
        if grad is None:
            if self.values.size != 1:
                raise ShapeError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.values)
        elif grad.shape != self.values.shape:
            raise ShapeError(f"Gradient shape {grad.shape} != tensor shape {self.shape}")

        order = _topological_order(self)
        pending: Dict[int, Array] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            upstream = pending.pop(id(node), None)
            if upstream is None:
                continue
            if node._backward is None:
                if node.grad is None:
                    node.grad = np.array(upstream, dtype=node.dtype, copy=True)
                else:
                    node.grad = node.grad + upstream
                continue
            for parent, parent_grad in zip(node._parents, node._backward(upstream)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, op={self._op})"

    def __add__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Scalar) -> "Tensor":
        return add(self, other)

    def __sub__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Scalar) -> "Tensor":
        return sub(_constant(other, self), self)

    def __mul__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Scalar) -> "Tensor":
        return mul(self, other)

    def __truediv__(self, other: Scalar) -> "Tensor":
        return scale(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited: set[int] = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def _result(values: Array, parents: Tuple[Tensor, ...], backward: BackwardFn, op: str) -> Tensor:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad = None
    out.name = None
    out._op = op
    out.requires_grad = _mode.grad_enabled and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _constant(value: Union[Tensor, Scalar, Array], like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=like.dtype)


def _unbroadcast(grad: Array, shape: Tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise --------------------------------------------------------------


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    b = _constant(b, a)
    a_shape, b_shape = a.shape, b.shape

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

    return _result(a.values + b.values, (a, b), backward, "add")


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    b = _constant(b, a)
    a_shape, b_shape = a.shape, b.shape

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)

    return _result(a.values - b.values, (a, b), backward, "sub")


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    b = _constant(b, a)
    a_values, b_values = a.values, b.values

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (
            _unbroadcast(g * b_values, a_values.shape),
            _unbroadcast(g * a_values, b_values.shape),
        )

    return _result(a_values * b_values, (a, b), backward, "mul")


def neg(x: Tensor) -> Tensor:
    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (-g,)

    return _result(-x.values, (x,), backward, "neg")


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a Python scalar that takes no gradient."""
    factor = float(factor)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * factor,)

    return _result(x.values * factor, (x,), backward, "scale")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.values)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * out,)

    return _result(out, (x,), backward, "exp")


def log(x: Tensor) -> Tensor:
    x_values = x.values
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x_values)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g / x_values,)

    return _result(out, (x,), backward, "log")


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.values))

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * out * (1.0 - out),)

    return _result(out.astype(x.dtype, copy=False), (x,), backward, "sigmoid")


def log_sigmoid(x: Tensor) -> Tensor:
    """Numerically stable ``log(sigmoid(x))``."""
    x_values = x.values
    out = -(np.maximum(-x_values, 0.0) + np.log1p(np.exp(-np.abs(x_values))))
    # d/dx log sigmoid(x) = sigmoid(-x)
    slope = 0.5 * (1.0 - np.tanh(0.5 * x_values))

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * slope,)

    return _result(out.astype(x.dtype, copy=False), (x,), backward, "log_sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.values)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * (1.0 - out * out),)

    return _result(out, (x,), backward, "tanh")


def relu(x: Tensor) -> Tensor:
    gate = (x.values > 0).astype(x.dtype)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * gate,)

    return _result(x.values * gate, (x,), backward, "relu")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x_values = x.values
    inner = _GELU_C * (x_values + 0.044715 * x_values ** 3)
    t = np.tanh(inner)
    out = 0.5 * x_values * (1.0 + t)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * x_values ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x_values * (1.0 - t * t) * d_inner),)

    return _result(out.astype(x.dtype, copy=False), (x,), backward, "gelu")


# -- reductions ---------------------------------------------------------------


def sum_(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    shape = x.shape

    def backward(g: Array) -> Sequence[Optional[Array]]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    out = np.asarray(x.values.sum(axis=axis, keepdims=keepdims), dtype=x.dtype)
    return _result(out, (x,), backward, "sum")


def mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.values.size if axis is None else x.shape[axis]
    return scale(sum_(x, axis=axis, keepdims=keepdims), 1.0 / count)


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    """Max-stabilised log-sum-exp over one axis."""
    peak = x.values.max(axis=axis, keepdims=True)
    shifted = np.exp(x.values - peak)
    total = shifted.sum(axis=axis, keepdims=True)
    out = np.squeeze(peak + np.log(total), axis=axis)
    weights = shifted / total

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (np.expand_dims(g, axis) * weights,)

    return _result(out, (x,), backward, "logsumexp")


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by max-subtraction."""
    if x.ndim < 1:
        raise ShapeError("softmax_rows needs rank >= 1")
    shifted = np.exp(x.values - x.values.max(axis=-1, keepdims=True))
    out = shifted / shifted.sum(axis=-1, keepdims=True)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _result(out, (x,), backward, "softmax_rows")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalise the last axis to zero mean and unit variance, then apply gain and bias."""
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(f"layer_norm gain/bias must have shape ({width},), got {gain.shape}/{bias.shape}")
    centred = x.values - x.values.mean(axis=-1, keepdims=True)
    variance = (centred * centred).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + eps)
    normed = centred * inv_std
    gain_values = gain.values

    def backward(g: Array) -> Sequence[Optional[Array]]:
        g_normed = g * gain_values
        g_x = inv_std * (
            g_normed
            - g_normed.mean(axis=-1, keepdims=True)
            - normed * (g_normed * normed).mean(axis=-1, keepdims=True)
        )
        return g_x, _unbroadcast(g * normed, (width,)), _unbroadcast(g, (width,))

    out = (normed * gain_values + bias.values).astype(x.dtype, copy=False)
    return _result(out, (x, gain, bias), backward, "layer_norm")


# -- structure ----------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    a_values, b_values = a.values, b.values

    def backward(g: Array) -> Sequence[Optional[Array]]:
        g_a = np.matmul(g, np.swapaxes(b_values, -1, -2))
        g_b = np.matmul(np.swapaxes(a_values, -1, -2), g)
        return _unbroadcast(g_a, a_values.shape), _unbroadcast(g_b, b_values.shape)

    return _result(np.matmul(a_values, b_values), (a, b), backward, "matmul")


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    source = x.shape

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g.reshape(source),)

    try:
        out = x.values.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"Cannot reshape {source} to {shape}") from e
    return _result(out, (x,), backward, "reshape")


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (np.swapaxes(g, axis1, axis2),)

    return _result(np.swapaxes(x.values, axis1, axis2), (x,), backward, "swapaxes")


def index(x: Tensor, key: Any) -> Tensor:
    """Basic or integer-array indexing; the backward pass scatter-adds."""
    shape, dtype = x.shape, x.dtype
    parts = key if isinstance(key, tuple) else (key,)
    advanced = any(isinstance(part, (list, np.ndarray)) for part in parts)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        g_x = np.zeros(shape, dtype=dtype)
        if advanced:
            np.add.at(g_x, key, g)
        else:
            g_x[key] += g
        return (g_x,)

    return _result(np.array(x.values[key], copy=True), (x,), backward, "index")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("stack needs at least one tensor")
    count = len(tensors)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return [np.take(g, i, axis=axis) for i in range(count)]

    try:
        out = np.stack([t.values for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack shapes differ: {[t.shape for t in tensors]}") from e
    return _result(out, tuple(tensors), backward, "stack")


def embedding_lookup(table: Tensor, ids: Any) -> Tensor:
    """Gather rows of ``table``; output shape is ``ids.shape + (width,)``."""
    id_array = np.asarray(ids, dtype=np.int64)
    rows = table.shape[0]
    if id_array.size and (id_array.min() < 0 or id_array.max() >= rows):
        raise IndexOutOfRangeError(
            f"lookup ids must lie in [0, {rows}), got range [{id_array.min()}, {id_array.max()}]"
        )
    shape, dtype = table.shape, table.dtype

    def backward(g: Array) -> Sequence[Optional[Array]]:
        g_table = np.zeros(shape, dtype=dtype)
        np.add.at(g_table, id_array, g)
        return (g_table,)

    return _result(table.values[id_array], (table,), backward, "embedding_lookup")


def dropout(x: Tensor, p: float, rng: Optional[RngStream], training: bool) -> Tensor:
    """Inverted dropout; a fresh mask is drawn from ``rng`` on every call.

    Raises:
        InvalidArgumentError: If ``p`` is outside [0, 1)
    """
    if not 0.0 <= p < 1.0:
        raise InvalidArgumentError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise InvalidArgumentError("training-mode dropout needs an rng stream")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)

    def backward(g: Array) -> Sequence[Optional[Array]]:
        return (g * keep,)

    return _result(x.values * keep, (x,), backward, "dropout")
