"""Gradient verification of the core ops and of a full Transformer objective."""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from srma_core import GradCheckReport, RngStream, Tensor, check_ops, grad_check_params, index, precision, reshape, stack

from ..rec_api.types import BatchViews, ForwardStreams, Mode
from .config import EncoderConfig
from .encoders import TransformerEncoder
from .losses import info_nce, rec_loss
from .model_augment import NeuronMaskHook

logger = logging.getLogger(__name__)

OP_TOLERANCE = 1e-4
COMPOSED_TOLERANCE = 1e-3


@dataclass
class GradCheckSummary:
    """Op-level and composed gradient-check results."""
    ops: GradCheckReport
    composed: Dict[str, float]

    @property
    def composed_max_rel_err(self) -> float:
        return max(self.composed.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.ops.passed(OP_TOLERANCE) and bool(self.composed) and self.composed_max_rel_err <= COMPOSED_TOLERANCE

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} max_rel_err={self.ops.max_rel_err:.3e} composed_max_rel_err={self.composed_max_rel_err:.3e}"


def composed_transformer_check(seed: int = 0, eps: float = 1e-6) -> Dict[str, float]:
    """Check every parameter of a 2-layer Transformer under ``rec_loss + info_nce``.

    Sequences have length 4 and one is left-padded; dropout is off so the
    objective is deterministic. Runs in 64-bit.
    """
    rng = RngStream(seed, "gradcheck/composed")
    num_items, maxlen = 5, 4
    config = EncoderConfig(layers=2, hidden=4, heads=2, attn_dropout=0.0, init_std=0.3)
    ids = np.array([[0, 1, 2, 3], [4, 5, 1, 2]], dtype=np.int64)
    targets = np.array([[0, 2, 3, 4], [5, 1, 2, 3]], dtype=np.int64)
    negatives = np.asarray(rng.integers(1, num_items + 1, size=(2, maxlen, 1)), dtype=np.int64)
    views = np.array([[0, 0, 1, 2], [0, 1, 3, 2], [3, 4, 5, 1], [0, 4, 5, 2]], dtype=np.int64)
    with precision("float64"):
        encoder = TransformerEncoder(num_items, maxlen, config, NeuronMaskHook(0.0), rng.fork("init"))

        def objective() -> Tensor:
            hidden = encoder.forward(ids, Mode.TRAIN, ForwardStreams())
            z = encoder.forward(views, Mode.TRAIN, ForwardStreams()).last_position()
            paired = reshape(stack([index(z, slice(0, 2)), index(z, slice(2, 4))], axis=1), (4, config.hidden))
            return rec_loss(hidden, targets, negatives, encoder.item_table) + info_nce(BatchViews(paired))

        errors = grad_check_params(objective, encoder.params, eps)
    worst = max(errors, key=errors.__getitem__)
    logger.info(f"Composed gradient check over {len(errors)} parameters: max_rel_err={errors[worst]:.3e} ({worst})")
    return errors


def run_gradcheck(num_cases: int = 112, seed: int = 0) -> GradCheckSummary:
    """Randomized op checks followed by the composed Transformer check."""
    return GradCheckSummary(ops=check_ops(num_cases, seed), composed=composed_transformer_check(seed))
