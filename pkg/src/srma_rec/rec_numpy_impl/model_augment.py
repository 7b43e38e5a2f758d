"""Model-level augmentation: neuron masking, layer dropping and encoder complementing."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import numpy.typing as npt

from srma_core import ParamStore, RngStream, Tensor, dropout, gelu, matmul, no_grad, scale

from ..rec_api.exceptions import ComplementMissingError, ModelAugmentationError
from ..rec_api.interfaces import SequenceEncoder
from ..rec_api.types import ComplementKind, ForwardStreams, HiddenStates, Mode

logger = logging.getLogger(__name__)


class NeuronMaskHook:
    """Dropout policy installed in every FFN layer.

    All FFN layers share one probability ``p``. In training mode every call
    draws a fresh mask from the given stream; in eval mode it is the identity.
    """

    def __init__(self, p: float) -> None:
        if not 0.0 <= p < 1.0:
            raise ModelAugmentationError(f"Neuron-mask probability must lie in [0, 1), got {p}")
        self.p = p

    def __call__(self, hidden: Tensor, rng: Optional[RngStream], training: bool) -> Tensor:
        if training and self.p > 0.0 and rng is None:
            raise ModelAugmentationError("Training-mode neuron masking needs an rng stream")
        return dropout(hidden, self.p, rng, training)

    def __repr__(self) -> str:
        return f"NeuronMaskHook(p={self.p})"


def neuron_mask_hook(p: float) -> NeuronMaskHook:
    return NeuronMaskHook(p)


class FfnStack:
    """K residual FFN layers appended after the encoder.

    Each layer maps ``x -> (x + W2 mask(gelu(x W1 + b1)) + b2) * keep`` where
    ``keep`` zeroes pad positions. During training ``dropped`` layers chosen
    uniformly at random are skipped on every forward that receives a
    layer-drop stream; eval applies all layers.

    Args:
        params: Store the layer weights are registered in
        width: Hidden dimension d
        stack_layers: K
        dropped_layers: M, with 0 <= M < K
        hook: Neuron-mask policy shared with the encoder
        init: Stream for the normal weight init
        init_std: Standard deviation of the init
        zero_init: Start every layer at zero, making the stack the identity
    """

    def __init__(
        self,
        params: ParamStore,
        width: int,
        stack_layers: int,
        dropped_layers: int,
        hook: NeuronMaskHook,
        init: RngStream,
        init_std: float = 0.02,
        zero_init: bool = False,
        prefix: str = "stack/",
    ) -> None:
        if stack_layers < 1:
            raise ModelAugmentationError("K must be at least 1")
        if not 0 <= dropped_layers < stack_layers:
            raise ModelAugmentationError(f"M ({dropped_layers}) must satisfy 0 <= M < K ({stack_layers})")
        self.params = params
        self.stack_layers = stack_layers
        self.dropped_layers = dropped_layers
        self.hook = hook
        self.prefix = prefix
        self.layers_applied_last = 0
        self.skipped_last: List[int] = []
        inner = 4 * width
        for layer in range(stack_layers):
            name = f"{prefix}{layer}/"
            if zero_init:
                params.add(name + "w1", np.zeros((width, inner)))
                params.add(name + "w2", np.zeros((inner, width)))
            else:
                params.add(name + "w1", init.normal((width, inner), init_std))
                params.add(name + "w2", init.normal((inner, width), init_std))
            params.add(name + "b1", np.zeros(inner))
            params.add(name + "b2", np.zeros(width))

    def sample_skipped(self, rng: RngStream) -> List[int]:
        """A uniformly random M-subset of layer indices, sorted."""
        if self.dropped_layers == 0:
            return []
        return sorted(int(i) for i in rng.choice(self.stack_layers, self.dropped_layers))

    def _layer(self, layer: int, x: Tensor, keep: Tensor, rng: Optional[RngStream], training: bool) -> Tensor:
        p = self.params
        name = f"{self.prefix}{layer}/"
        hidden = self.hook(gelu(matmul(x, p[name + "w1"]) + p[name + "b1"]), rng, training)
        return (x + (matmul(hidden, p[name + "w2"]) + p[name + "b2"])) * keep

    def __call__(self, hidden: HiddenStates, mode: Mode, streams: Optional[ForwardStreams] = None) -> HiddenStates:
        streams = streams or ForwardStreams()
        training = mode is Mode.TRAIN
        skipped = self.sample_skipped(streams.layer_drop) if training and streams.layer_drop is not None else []
        keep = Tensor(hidden.real_positions()[..., None], dtype=hidden.states.dtype)
        x = hidden.states
        applied = 0
        for layer in range(self.stack_layers):
            if layer in skipped:
                continue
            x = self._layer(layer, x, keep, streams.neuron_mask, training)
            applied += 1
        self.layers_applied_last = applied
        self.skipped_last = skipped
        if skipped:
            logger.debug(f"Layer drop skipped {skipped}")
        return HiddenStates(x, hidden.lengths)


def ffn_stack_with_layerdrop(
    hidden: HiddenStates,
    stack: FfnStack,
    rng: Optional[RngStream],
    mode: Mode,
    neuron_mask: Optional[RngStream] = None,
) -> HiddenStates:
    """Run ``hidden`` through ``stack``, skipping ``stack.dropped_layers`` layers when training."""
    return stack(hidden, mode, ForwardStreams(neuron_mask=neuron_mask, layer_drop=rng))


@dataclass
class ComplementEncoder:
    """A pre-trained encoder whose parameters are frozen."""
    kind: ComplementKind
    encoder: SequenceEncoder

    def __post_init__(self) -> None:
        if self.kind is ComplementKind.NONE:
            raise ModelAugmentationError("A complement encoder needs a concrete kind")
        if not self.encoder.params.frozen:
            self.encoder.params.freeze()

    @property
    def params(self) -> ParamStore:
        return self.encoder.params

    def embed(self, ids: npt.NDArray[np.int64]) -> Tensor:
        """Final-position embedding in eval mode, without recording a graph."""
        with no_grad():
            return self.encoder.forward(ids, Mode.EVAL).last_position()


def complement_embedding(
    z: Tensor,
    ids: npt.NDArray[np.int64],
    comp: Optional[ComplementEncoder],
    gamma: float,
) -> Tensor:
    """``z + gamma * last_hidden(comp(ids))``; no gradient reaches ``comp``.

    Raises:
        ComplementMissingError: If ``gamma > 0`` and no complement is given
    """
    if gamma < 0 or not math.isfinite(gamma):
        raise ModelAugmentationError(f"gamma must be a non-negative finite number, got {gamma}")
    if gamma == 0.0:
        return z
    if comp is None:
        raise ComplementMissingError("Encoder complementing is enabled but no complement encoder is loaded")
    return z + scale(comp.embed(ids), gamma)
