"""Next-item log-likelihood loss, InfoNCE and the joint objective."""

import logging
import math
from typing import Optional

import numpy as np
import numpy.typing as npt

from srma_core import (
    Tensor,
    embedding_lookup,
    index,
    log_sigmoid,
    logsumexp,
    matmul,
    mean,
    neg,
    reshape,
    scale,
    sum_,
    swapaxes,
)

from ..rec_api.exceptions import LossError
from ..rec_api.types import PAD_ID, BatchViews, HiddenStates, LossReport

logger = logging.getLogger(__name__)


def rec_loss(
    hidden: HiddenStates,
    targets: npt.NDArray[np.int64],
    negatives: npt.NDArray[np.int64],
    item_table: Tensor,
) -> Tensor:
    """Mean over non-pad positions of ``-log s(h.e_pos) - sum_j log s(-h.e_neg_j)``.

    Args:
        hidden: ``(batch, T, d)`` states
        targets: ``(batch, T)`` next items; ``0`` flags a pad position
        negatives: ``(batch, T, n)`` sampled negatives
        item_table: Item embeddings used for scoring

    Raises:
        LossError: If every position is padded or shapes disagree
    """
    states = hidden.states
    batch, t, width = states.shape
    if targets.shape != (batch, t):
        raise LossError(f"targets must have shape {(batch, t)}, got {targets.shape}")
    if negatives.ndim != 3 or negatives.shape[:2] != (batch, t):
        raise LossError(f"negatives must have shape {(batch, t)} + (n,), got {negatives.shape}")
    real = targets != PAD_ID
    count = int(real.sum())
    if count == 0:
        raise LossError("Every position is padded")

    positive_logits = sum_(states * embedding_lookup(item_table, targets), axis=-1)
    expanded = reshape(states, (batch, t, 1, width))
    negative_logits = sum_(expanded * embedding_lookup(item_table, negatives), axis=-1)
    per_position = neg(log_sigmoid(positive_logits)) - sum_(log_sigmoid(neg(negative_logits)), axis=-1)
    weights = Tensor(real, dtype=states.dtype)
    return scale(sum_(per_position * weights), 1.0 / count)


def _off_diagonal(square: Tensor) -> Tensor:
    """``(n, n-1)`` matrix of the off-diagonal entries, row by row."""
    n = square.shape[0]
    flat = index(reshape(square, (n * n,)), slice(1, None))
    trimmed = index(reshape(flat, (n - 1, n + 1)), (slice(None), slice(None, -1)))
    return reshape(trimmed, (n, n - 1))


def info_nce(views: BatchViews) -> Tensor:
    """Contrastive loss over ``2N`` views with dot-product similarity.

    For anchor ``a`` with partner ``a ^ 1`` the term is
    ``logsumexp_{m != a} sim(a, m) - sim(a, a ^ 1)``; the positive stays in the
    denominator. Mean over all anchors.

    Raises:
        LossError: If there are no views
    """
    v = views.embeddings
    n = v.shape[0]
    if n == 0:
        raise LossError("info_nce needs at least one sequence")
    sims = matmul(v, swapaxes(v, 0, 1))
    anchors = np.arange(n)
    positives = index(sims, (anchors, anchors ^ 1))
    return mean(logsumexp(_off_diagonal(sims), axis=-1) - positives)


def joint_objective(rec: Tensor, ssl: Optional[Tensor], lam: float) -> Tensor:
    """Differentiable ``rec + lam * ssl``; ``ssl`` may be omitted when ``lam`` is 0."""
    if lam < 0:
        raise LossError(f"lambda must be non-negative, got {lam}")
    if ssl is None:
        if lam != 0.0:
            raise LossError("A contrastive loss is required when lambda > 0")
        return rec
    return rec + scale(ssl, lam)


def joint_loss(rec: float, ssl: float, lam: float) -> LossReport:
    """``L = rec + lam * ssl`` as a report.

    Raises:
        LossError: On negative lambda or non-finite components
    """
    if lam < 0:
        raise LossError(f"lambda must be non-negative, got {lam}")
    total = rec + lam * ssl
    if not all(math.isfinite(x) for x in (rec, ssl, total)):
        raise LossError(f"Non-finite loss: rec={rec} ssl={ssl}")
    return LossReport(loss_rec=rec, loss_ssl=ssl, lam=lam, loss=total)
