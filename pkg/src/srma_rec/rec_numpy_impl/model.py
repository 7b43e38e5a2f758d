"""Model composition: encoder, FFN stack and the frozen complement."""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import numpy.typing as npt

from srma_core import ParamStore, RngStream, Tensor, load_params, save_params

from ..rec_api.exceptions import ModelAugmentationError
from ..rec_api.interfaces import SequenceEncoder
from ..rec_api.types import Catalog, ComplementKind, EncoderKind, ForwardStreams, HiddenStates, Mode
from .config import EncoderConfig, ExperimentConfig
from .encoders import GruEncoder, TransformerEncoder
from .model_augment import ComplementEncoder, FfnStack, NeuronMaskHook, neuron_mask_hook

logger = logging.getLogger(__name__)


class SRMAModel(SequenceEncoder):
    """A sequence encoder optionally followed by a layer-drop FFN stack.

    The stack is part of the recommender: its output scores items during
    training and evaluation alike.
    """

    def __init__(self, encoder: SequenceEncoder, stack: Optional[FfnStack] = None) -> None:
        if stack is not None and stack.params is not encoder.params:
            raise ModelAugmentationError("Encoder and FFN stack must share one parameter store")
        self.encoder = encoder
        self.stack = stack

    def forward(
        self,
        ids: npt.NDArray[np.int64],
        mode: Mode,
        streams: Optional[ForwardStreams] = None,
    ) -> HiddenStates:
        hidden = self.encoder.forward(ids, mode, streams)
        if self.stack is None:
            return hidden
        return self.stack(hidden, mode, streams)

    @property
    def params(self) -> ParamStore:
        return self.encoder.params

    @property
    def item_table(self) -> Tensor:
        return self.encoder.item_table

    @property
    def maxlen(self) -> int:
        return self.encoder.maxlen

    @property
    def width(self) -> int:
        return self.encoder.width


def build_encoder(
    kind: EncoderKind,
    num_items: int,
    maxlen: int,
    config: EncoderConfig,
    hook: NeuronMaskHook,
    init: RngStream,
    layers: Optional[int] = None,
    params: Optional[ParamStore] = None,
) -> SequenceEncoder:
    if kind is EncoderKind.GRU:
        return GruEncoder(num_items, maxlen, config, init, params=params)
    return TransformerEncoder(num_items, maxlen, config, hook, init, layers=layers, params=params)


def build_model(config: ExperimentConfig, catalog: Catalog, stack: Optional[bool] = None) -> SRMAModel:
    """Encoder plus (unless disabled) the FFN stack, initialised from ``train.seed``."""
    init = RngStream(config.train.seed, "init/model")
    hook = neuron_mask_hook(config.modelaug.p)
    encoder = build_encoder(
        config.encoder.kind, catalog.num_items, config.data.maxlen, config.encoder, hook, init,
    )
    use_stack = config.modelaug.stack if stack is None else stack
    ffn_stack = None
    if use_stack:
        ffn_stack = FfnStack(
            encoder.params,
            config.encoder.hidden,
            config.modelaug.stack_layers,
            config.modelaug.dropped_layers,
            hook,
            init,
            init_std=config.encoder.init_std,
        )
    model = SRMAModel(encoder, ffn_stack)
    logger.debug(f"Built model with {model.params.num_values()} values: {model.params!r}")
    return model


def build_complement_encoder(kind: ComplementKind, config: ExperimentConfig, catalog: Catalog) -> SequenceEncoder:
    """An untrained complement of ``kind``; trained without neuron masking."""
    if kind is ComplementKind.NONE:
        raise ModelAugmentationError("No complement kind selected")
    init = RngStream(config.train.seed, f"init/complement/{kind.value}")
    hook = neuron_mask_hook(0.0)
    if kind is ComplementKind.GRU:
        return build_encoder(EncoderKind.GRU, catalog.num_items, config.data.maxlen, config.encoder, hook, init)
    return build_encoder(EncoderKind.TRANSFORMER, catalog.num_items, config.data.maxlen, config.encoder, hook, init, layers=1)


def save_complement(path: Union[str, Path], complement: ComplementEncoder) -> None:
    """Write the complement with the frozen header flag set."""
    save_params(path, complement.params)


def load_complement(
    path: Union[str, Path], kind: ComplementKind, config: ExperimentConfig, catalog: Catalog
) -> ComplementEncoder:
    """Load a frozen complement checkpoint.

    Raises:
        ModelAugmentationError: If the checkpoint is not flagged frozen
        CheckpointError: If it is unreadable or lacks parameters
    """
    encoder = build_complement_encoder(kind, config, catalog)
    frozen = load_params(path, encoder.params)
    if not frozen:
        logger.error(f"Complement checkpoint {path} is not marked frozen")
        raise ModelAugmentationError(f"Complement checkpoint {path} is not marked frozen")
    return ComplementEncoder(kind, encoder)
