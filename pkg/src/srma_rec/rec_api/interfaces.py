"""Core interfaces for sequential recommenders.

Encoders, and models composed of an encoder plus post-encoder layers, share a
single contract so the trainer and evaluator never depend on the concrete
architecture.
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
import numpy.typing as npt

from srma_core import ParamStore, Tensor

from .types import ForwardStreams, HiddenStates, Mode


class SequenceEncoder(ABC):
    """Interface for sequence encoders.

    Implementations map a left-padded ``(batch, maxlen)`` id matrix to
    per-position hidden states:
    - Causal self-attention encoders
    - Recurrent encoders
    - Encoders extended with post-encoder layer stacks
    """

    @abstractmethod
    def forward(
        self,
        ids: npt.NDArray[np.int64],
        mode: Mode,
        streams: Optional[ForwardStreams] = None,
    ) -> HiddenStates:
        """Encode a batch of padded sequences.

        Args:
            ids: ``(batch, maxlen)`` left-padded item ids
            mode: ``Mode.TRAIN`` draws stochastic masks from ``streams``;
                ``Mode.EVAL`` is deterministic
            streams: Random streams for the training-mode operators

        Returns:
            HiddenStates: ``(batch, maxlen, d)`` states with true lengths

        Raises:
            EncoderError: If an id is outside the catalog or the shape is wrong
        """
        pass

    @property
    @abstractmethod
    def params(self) -> ParamStore:
        """Get every parameter the forward pass reads."""
        pass

    @property
    @abstractmethod
    def item_table(self) -> Tensor:
        """Get the item embedding table used for both input lookup and scoring."""
        pass

    @property
    @abstractmethod
    def maxlen(self) -> int:
        """Get the fixed input length."""
        pass

    @property
    @abstractmethod
    def width(self) -> int:
        """Get the hidden dimension ``d``."""
        pass
