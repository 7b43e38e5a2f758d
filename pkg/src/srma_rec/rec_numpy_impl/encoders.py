"""Causal self-attention and GRU sequence encoders.

Both encoders read left-padded ``(batch, maxlen)`` id matrices and return
per-position hidden states with pad positions zeroed, so the trainer and
evaluator treat them interchangeably.
"""

import logging
import math
from typing import Optional

import numpy as np
import numpy.typing as npt

from srma_core import (
    ParamStore,
    RngStream,
    Tensor,
    dropout,
    embedding_lookup,
    gelu,
    index,
    layer_norm,
    matmul,
    reshape,
    scale,
    sigmoid,
    softmax_rows,
    stack,
    swapaxes,
    tanh,
)

from ..rec_api.exceptions import EncoderError
from ..rec_api.interfaces import SequenceEncoder
from ..rec_api.types import PAD_ID, ForwardStreams, HiddenStates, Mode
from .config import EncoderConfig
from .model_augment import NeuronMaskHook

logger = logging.getLogger(__name__)

ATTENTION_MASK_VALUE = -1e9


class _EncoderBase(SequenceEncoder):
    def __init__(self, num_items: int, maxlen: int, width: int, params: Optional[ParamStore], prefix: str) -> None:
        if num_items < 1:
            raise EncoderError("An encoder needs at least one item")
        if maxlen < 1:
            raise EncoderError("maxlen must be at least 1")
        self.num_items = num_items
        self.prefix = prefix
        self._maxlen = maxlen
        self._width = width
        self._params = params if params is not None else ParamStore()

    @property
    def params(self) -> ParamStore:
        return self._params

    @property
    def item_table(self) -> Tensor:
        return self._params[self.prefix + "item_emb"]

    @property
    def maxlen(self) -> int:
        return self._maxlen

    @property
    def width(self) -> int:
        return self._width

    def _check_ids(self, ids: npt.NDArray[np.int64]) -> npt.NDArray[np.int64]:
        array = np.asarray(ids)
        if array.ndim != 2 or array.shape[1] != self._maxlen:
            raise EncoderError(f"Expected ids of shape (batch, {self._maxlen}), got {array.shape}")
        if not np.issubdtype(array.dtype, np.integer):
            raise EncoderError(f"Ids must be integers, got {array.dtype}")
        if array.size and (array.min() < 0 or array.max() > self.num_items + 1):
            raise EncoderError(f"Ids must lie in [0, {self.num_items + 1}]")
        return array.astype(np.int64, copy=False)

    def _keep(self, real: npt.NDArray[np.bool_]) -> Tensor:
        return Tensor(real[..., None], dtype=self.item_table.dtype)


class TransformerEncoder(_EncoderBase):
    """Post-LN causal Transformer with learned positions and a tied item table.

    Args:
        num_items: Catalog size |V|; the table has |V| + 2 rows
        maxlen: Fixed input length
        config: Architecture settings
        hook: Neuron-mask policy applied to every FFN hidden layer
        init: Stream for the normal weight init
        layers: Overrides ``config.layers``
        params: Store to register into (a fresh one by default)
        prefix: Parameter name prefix
    """

    def __init__(
        self,
        num_items: int,
        maxlen: int,
        config: EncoderConfig,
        hook: NeuronMaskHook,
        init: RngStream,
        layers: Optional[int] = None,
        params: Optional[ParamStore] = None,
        prefix: str = "",
    ) -> None:
        super().__init__(num_items, maxlen, config.hidden, params, prefix)
        if config.hidden % config.heads:
            raise EncoderError(f"hidden ({config.hidden}) must be divisible by heads ({config.heads})")
        self.config = config
        self.hook = hook
        self.num_layers = config.layers if layers is None else layers
        self.heads = config.heads
        self.head_dim = config.hidden // config.heads
        d, std = config.hidden, config.init_std
        p = self._params
        p.add(prefix + "item_emb", init.normal((num_items + 2, d), std))
        p.add(prefix + "pos_emb", init.normal((maxlen, d), std))
        p.add(prefix + "emb_ln/gain", np.ones(d))
        p.add(prefix + "emb_ln/bias", np.zeros(d))
        for layer in range(self.num_layers):
            name = f"{prefix}block{layer}/"
            for proj in ("q", "k", "v", "o"):
                p.add(name + f"w{proj}", init.normal((d, d), std))
                p.add(name + f"b{proj}", np.zeros(d))
            p.add(name + "ffn_w1", init.normal((d, 4 * d), std))
            p.add(name + "ffn_b1", np.zeros(4 * d))
            p.add(name + "ffn_w2", init.normal((4 * d, d), std))
            p.add(name + "ffn_b2", np.zeros(d))
            for norm in ("ln1", "ln2"):
                p.add(name + f"{norm}/gain", np.ones(d))
                p.add(name + f"{norm}/bias", np.zeros(d))

    def _attention_bias(self, real: npt.NDArray[np.bool_]) -> Tensor:
        """Additive ``(batch, 1, T, T)`` bias hiding future positions and pad keys."""
        t = self._maxlen
        causal = np.triu(np.ones((t, t), dtype=bool), k=1)
        hidden = causal[None, None, :, :] | ~real[:, None, None, :]
        return Tensor(np.where(hidden, ATTENTION_MASK_VALUE, 0.0), dtype=self.item_table.dtype)

    def _split_heads(self, x: Tensor) -> Tensor:
        batch, t, _ = x.shape
        return swapaxes(reshape(x, (batch, t, self.heads, self.head_dim)), 1, 2)

    def _merge_heads(self, x: Tensor) -> Tensor:
        batch, _, t, _ = x.shape
        return reshape(swapaxes(x, 1, 2), (batch, t, self._width))

    def _block(self, layer: int, x: Tensor, bias: Tensor, keep: Tensor, training: bool, streams: ForwardStreams) -> Tensor:
        p = self._params
        name = f"{self.prefix}block{layer}/"
        eps = self.config.ln_eps
        q = self._split_heads(matmul(x, p[name + "wq"]) + p[name + "bq"])
        k = self._split_heads(matmul(x, p[name + "wk"]) + p[name + "bk"])
        v = self._split_heads(matmul(x, p[name + "wv"]) + p[name + "bv"])
        scores = scale(matmul(q, swapaxes(k, 2, 3)), 1.0 / math.sqrt(self.head_dim)) + bias
        weights = dropout(softmax_rows(scores), self.config.attn_dropout, streams.attention, training)
        attended = matmul(self._merge_heads(matmul(weights, v)), p[name + "wo"]) + p[name + "bo"]
        x = layer_norm(x + attended, p[name + "ln1/gain"], p[name + "ln1/bias"], eps)
        hidden = self.hook(gelu(matmul(x, p[name + "ffn_w1"]) + p[name + "ffn_b1"]), streams.neuron_mask, training)
        x = layer_norm(x + (matmul(hidden, p[name + "ffn_w2"]) + p[name + "ffn_b2"]), p[name + "ln2/gain"], p[name + "ln2/bias"], eps)
        return x * keep

    def forward(
        self,
        ids: npt.NDArray[np.int64],
        mode: Mode,
        streams: Optional[ForwardStreams] = None,
    ) -> HiddenStates:
        ids = self._check_ids(ids)
        streams = streams or ForwardStreams()
        training = mode is Mode.TRAIN
        real = ids != PAD_ID
        keep = self._keep(real)
        p = self._params
        x = embedding_lookup(self.item_table, ids) + p[self.prefix + "pos_emb"]
        x = layer_norm(x, p[self.prefix + "emb_ln/gain"], p[self.prefix + "emb_ln/bias"], self.config.ln_eps) * keep
        bias = self._attention_bias(real)
        for layer in range(self.num_layers):
            x = self._block(layer, x, bias, keep, training, streams)
        return HiddenStates(x, real.sum(axis=1).astype(np.int64))


class GruEncoder(_EncoderBase):
    """Masked GRU; pad steps carry the state forward and output zeros.

    With a zero initial state, a left-padded prefix leaves every state zero,
    so the states of real positions do not depend on the amount of padding.
    """

    def __init__(
        self,
        num_items: int,
        maxlen: int,
        config: EncoderConfig,
        init: RngStream,
        params: Optional[ParamStore] = None,
        prefix: str = "",
    ) -> None:
        super().__init__(num_items, maxlen, config.hidden, params, prefix)
        self.config = config
        self.num_layers = config.gru_layers
        d, std = config.hidden, config.init_std
        p = self._params
        p.add(prefix + "item_emb", init.normal((num_items + 2, d), std))
        for layer in range(self.num_layers):
            name = f"{prefix}gru{layer}/"
            for gate in ("z", "r", "h"):
                p.add(name + f"w_{gate}", init.normal((d, d), std))
                p.add(name + f"u_{gate}", init.normal((d, d), std))
                p.add(name + f"b_{gate}", np.zeros(d))

    def _step(self, name: str, x_t: Tensor, h: Tensor) -> Tensor:
        p = self._params
        z = sigmoid(matmul(x_t, p[name + "w_z"]) + matmul(h, p[name + "u_z"]) + p[name + "b_z"])
        r = sigmoid(matmul(x_t, p[name + "w_r"]) + matmul(h, p[name + "u_r"]) + p[name + "b_r"])
        candidate = tanh(matmul(x_t, p[name + "w_h"]) + matmul(r * h, p[name + "u_h"]) + p[name + "b_h"])
        return (1.0 - z) * h + z * candidate

    def forward(
        self,
        ids: npt.NDArray[np.int64],
        mode: Mode,
        streams: Optional[ForwardStreams] = None,
    ) -> HiddenStates:
        ids = self._check_ids(ids)
        real = ids != PAD_ID
        dtype = self.item_table.dtype
        batch = ids.shape[0]
        x = embedding_lookup(self.item_table, ids)
        for layer in range(self.num_layers):
            name = f"{self.prefix}gru{layer}/"
            h = Tensor(np.zeros((batch, self._width)), dtype=dtype)
            outputs = []
            for t in range(self._maxlen):
                step_mask = Tensor(real[:, t:t + 1], dtype=dtype)
                x_t = index(x, (slice(None), t, slice(None)))
                h = step_mask * self._step(name, x_t, h) + (1.0 - step_mask) * h
                outputs.append(h * step_mask)
            x = stack(outputs, axis=1)
        return HiddenStates(x, real.sum(axis=1).astype(np.int64))


def last_hidden(hidden: HiddenStates) -> Tensor:
    """``(batch, d)`` view embeddings: the state at the most recent position."""
    return hidden.last_position()


def transformer_forward(
    ids: npt.NDArray[np.int64],
    encoder: TransformerEncoder,
    mode: Mode,
    streams: Optional[ForwardStreams] = None,
) -> HiddenStates:
    return encoder.forward(ids, mode, streams)


def gru_forward(ids: npt.NDArray[np.int64], encoder: GruEncoder, mode: Mode) -> HiddenStates:
    return encoder.forward(ids, mode)

