"""Finite-difference verification of analytic gradients."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from . import tensor as ops
from .exceptions import GradCheckError, NonFiniteError
from .params import ParamStore
from .rng import RngStream
from .tensor import Tensor, no_grad, precision

logger = logging.getLogger(__name__)


def _relative_error(analytic: npt.NDArray[Any], numeric: npt.NDArray[Any]) -> float:
    if analytic.size == 0:
        return 0.0
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denominator))


def _scalar(out: Tensor) -> float:
    if out.values.size != 1:
        raise GradCheckError(f"Checked function must return a scalar, got shape {out.shape}")
    value = float(out.values.reshape(()))
    if not np.isfinite(value):
        raise NonFiniteError("Checked function returned a non-finite value")
    return value


def _numeric_gradient(fn: Callable[[], Tensor], x: Tensor, eps: float) -> npt.NDArray[np.float64]:
    numeric = np.zeros(x.shape, dtype=np.float64)
    base = x.values
    with no_grad():
        for idx in np.ndindex(*x.shape):
            shifted = np.array(base, copy=True)
            shifted[idx] = base[idx] + eps
            x.values = shifted
            upper = _scalar(fn())
            shifted = np.array(base, copy=True)
            shifted[idx] = base[idx] - eps
            x.values = shifted
            lower = _scalar(fn())
            numeric[idx] = (upper - lower) / (2.0 * eps)
    x.values = base
    return numeric


def grad_check(fn: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """Compare the analytic gradient of ``fn`` at ``x`` with central differences.

    ``fn`` must be pure and deterministic: pin every rng stream it uses by
    creating it inside ``fn``.

    Returns:
        float: max over elements of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)

    Raises:
        NonFiniteError: If an intermediate value is not finite
    """
    x.requires_grad = True
    x.grad = None
    out = fn(x)
    _scalar(out)
    out.backward()
    analytic = np.zeros(x.shape) if x.grad is None else np.asarray(x.grad, dtype=np.float64)
    numeric = _numeric_gradient(lambda: fn(x), x, eps)
    x.grad = None
    return _relative_error(analytic, numeric)


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: ParamStore,
    eps: float = 1e-6,
    names: Optional[Iterable[str]] = None,
) -> Dict[str, float]:
    """Gradient-check every (or every named) trainable parameter of a composed loss.

    Returns:
        Dict[str, float]: Max relative error per parameter name
    """
    params.zero_grad()
    loss = loss_fn()
    _scalar(loss)
    loss.backward()
    selected = list(names) if names is not None else [n for n, _ in params.trainable_items()]
    analytic = {name: np.asarray(params[name].grad, dtype=np.float64) for name in selected}
    errors: Dict[str, float] = {}
    for name in selected:
        numeric = _numeric_gradient(loss_fn, params[name], eps)
        errors[name] = _relative_error(analytic[name], numeric)
    params.zero_grad()
    return errors


@dataclass
class GradCheckReport:
    """Outcome of a randomized gradient-check suite."""
    cases: int = 0
    max_rel_err: float = 0.0
    worst_case: str = ""
    per_op: Dict[str, float] = field(default_factory=dict)

    def record(self, label: str, error: float) -> None:
        self.cases += 1
        self.per_op[label] = max(self.per_op.get(label, 0.0), error)
        if error >= self.max_rel_err:
            self.max_rel_err = error
            self.worst_case = label

    def passed(self, tolerance: float) -> bool:
        return self.cases > 0 and self.max_rel_err <= tolerance


OpCase = Tuple[str, Callable[[RngStream], List[Tuple[Callable[[Tensor], Tensor], Tensor]]]]


def _shape(rng: RngStream, rank: int) -> Tuple[int, ...]:
    return tuple(int(n) for n in rng.integers(1, 5, size=rank))


def _weighted(rng: RngStream, shape: Tuple[int, ...]) -> Callable[[Tensor], Tensor]:
    weights = Tensor(rng.normal(shape))
    return lambda y: ops.sum_(ops.mul(y, weights))


def _away_from_zero(rng: RngStream, shape: Tuple[int, ...]) -> Tensor:
    magnitude = 0.1 + rng.random(shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return Tensor(sign * magnitude)


def _case_matmul(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    batch, n, k, m = _shape(rng, 4)
    a = Tensor(rng.normal((batch, n, k)))
    b = Tensor(rng.normal((k, m)))
    w = _weighted(rng, (batch, n, m))
    return [(lambda x: w(ops.matmul(x, b)), a), (lambda x: w(ops.matmul(a, x)), b)]


def _case_softmax(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    shape = _shape(rng, 2)
    w = _weighted(rng, shape)
    return [(lambda x: w(ops.softmax_rows(x)), Tensor(rng.normal(shape)))]


def _case_layer_norm(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    rows, width = _shape(rng, 2)
    width += 2
    x = Tensor(rng.normal((rows, width)))
    gain = Tensor(1.0 + 0.1 * rng.normal(width))
    bias = Tensor(rng.normal(width))
    w = _weighted(rng, (rows, width))
    return [
        (lambda t: w(ops.layer_norm(t, gain, bias, 1e-5)), x),
        (lambda t: w(ops.layer_norm(x, t, bias, 1e-5)), gain),
        (lambda t: w(ops.layer_norm(x, gain, t, 1e-5)), bias),
    ]


def _unary(name: str, fn: Callable[[Tensor], Tensor], positive: bool = False, kink: bool = False) -> OpCase:
    def build(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
        shape = _shape(rng, 2)
        if positive:
            x = Tensor(0.5 + 1.5 * rng.random(shape))
        elif kink:
            x = _away_from_zero(rng, shape)
        else:
            x = Tensor(rng.normal(shape))
        w = _weighted(rng, shape)
        return [(lambda t: w(fn(t)), x)]

    return name, build


def _case_binary(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    rows, cols = _shape(rng, 2)
    a = Tensor(rng.normal((rows, cols)))
    b = Tensor(rng.normal((1, cols)))
    w = _weighted(rng, (rows, cols))
    return [
        (lambda t: w(ops.add(t, b)), a),
        (lambda t: w(ops.add(a, t)), b),
        (lambda t: w(ops.sub(a, t)), b),
        (lambda t: w(ops.mul(t, b)), a),
        (lambda t: w(ops.mul(a, t)), b),
    ]


def _case_reductions(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    shape = _shape(rng, 3)
    x = Tensor(rng.normal(shape))
    w_mean = _weighted(rng, (shape[0], shape[2]))
    w_lse = _weighted(rng, shape[:2])
    return [
        (lambda t: ops.sum_(ops.mul(t, t)), x),
        (lambda t: w_mean(ops.mean(t, axis=1)), x),
        (lambda t: w_lse(ops.logsumexp(t, axis=-1)), x),
    ]


def _case_structure(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    a, b, c = _shape(rng, 3)
    x = Tensor(rng.normal((a, b, c)))
    w_swap = _weighted(rng, (a, c, b))
    w_reshape = _weighted(rng, (a * b * c,))
    w_last = _weighted(rng, (a, c))
    picks = rng.integers(0, a, size=4)
    w_pick = _weighted(rng, (4, b, c))
    w_stack = _weighted(rng, (2, a, b, c))
    return [
        (lambda t: w_swap(ops.swapaxes(t, 1, 2)), x),
        (lambda t: w_reshape(ops.reshape(t, (a * b * c,))), x),
        (lambda t: w_last(ops.index(t, (slice(None), -1, slice(None)))), x),
        (lambda t: w_pick(ops.index(t, picks)), x),
        (lambda t: w_stack(ops.stack([t, ops.scale(t, 2.0)], axis=0)), x),
    ]


def _case_embedding(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    rows, width = _shape(rng, 2)
    ids = rng.integers(0, rows, size=(3, 2))
    w = _weighted(rng, (3, 2, width))
    return [(lambda t: w(ops.embedding_lookup(t, ids)), Tensor(rng.normal((rows, width))))]


def _case_dropout(rng: RngStream) -> List[Tuple[Callable[[Tensor], Tensor], Tensor]]:
    shape = _shape(rng, 2)
    p = float(0.1 + 0.8 * rng.random())
    w = _weighted(rng, shape)
    seed = rng.integer(0, 2 ** 31)
    return [(lambda t: w(ops.dropout(t, p, RngStream(seed, "gradcheck/dropout"), True)), Tensor(rng.normal(shape)))]


OP_CASES: List[OpCase] = [
    ("matmul", _case_matmul),
    ("softmax_rows", _case_softmax),
    ("layer_norm", _case_layer_norm),
    _unary("sigmoid", ops.sigmoid),
    _unary("log_sigmoid", ops.log_sigmoid),
    _unary("log", ops.log, positive=True),
    _unary("exp", ops.exp),
    _unary("tanh", ops.tanh),
    _unary("relu", ops.relu, kink=True),
    _unary("gelu", ops.gelu),
    _unary("neg", ops.neg),
    ("add/sub/mul", _case_binary),
    ("sum/mean/logsumexp", _case_reductions),
    ("reshape/swapaxes/index/stack", _case_structure),
    ("embedding_lookup", _case_embedding),
    ("dropout", _case_dropout),
]


def check_ops(num_cases: int = 112, seed: int = 0, eps: float = 1e-6) -> GradCheckReport:
    """Run ``num_cases`` randomized gradient checks cycling over every op, in 64-bit."""
    report = GradCheckReport()
    root = RngStream(seed, "gradcheck")
    with precision("float64"):
        for case in range(num_cases):
            name, build = OP_CASES[case % len(OP_CASES)]
            rng = root.fork(case)
            for fn, x in build(rng):
                report.record(name, grad_check(fn, x, eps))
    logger.info(f"Op gradient check: {report.cases} checks, max_rel_err={report.max_rel_err:.3e} ({report.worst_case})")
    return report
