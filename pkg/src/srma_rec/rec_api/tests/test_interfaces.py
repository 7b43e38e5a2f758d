"""Tests for the recommendation API interfaces."""

from typing import Optional

import numpy as np
import numpy.typing as npt
import pytest

from srma_core import ParamStore, Tensor, embedding_lookup
from srma_rec.rec_api.interfaces import SequenceEncoder
from srma_rec.rec_api.types import ForwardStreams, HiddenStates, Mode


class DummyEncoder(SequenceEncoder):
    """Bag-of-embeddings encoder for testing."""

    def __init__(self, num_items: int, width: int, maxlen: int) -> None:
        self._params = ParamStore()
        self._table = self._params.add("item_emb", np.eye(num_items + 2, width))
        self._maxlen = maxlen

    def forward(
        self,
        ids: npt.NDArray[np.int64],
        mode: Mode,
        streams: Optional[ForwardStreams] = None,
    ) -> HiddenStates:
        lengths = np.count_nonzero(ids, axis=1)
        return HiddenStates(embedding_lookup(self._table, ids), lengths)

    @property
    def params(self) -> ParamStore:
        return self._params

    @property
    def item_table(self) -> Tensor:
        return self._table

    @property
    def maxlen(self) -> int:
        return self._maxlen

    @property
    def width(self) -> int:
        return self._table.shape[1]


class TestSequenceEncoder:
    """Test cases for the SequenceEncoder contract."""

    def test_cannot_instantiate_abstract(self) -> None:
        """Test the interface itself is abstract."""
        with pytest.raises(TypeError):
            SequenceEncoder()  # type: ignore[abstract]

    def test_dummy_forward_shape(self) -> None:
        """Test a concrete encoder yields batch x maxlen x d states."""
        encoder = DummyEncoder(num_items=5, width=4, maxlen=3)
        states = encoder.forward(np.array([[0, 1, 2], [3, 4, 5]]), Mode.EVAL)

        assert states.states.shape == (2, 3, 4)
        np.testing.assert_array_equal(states.lengths, [2, 3])
        assert encoder.item_table.shape == (7, 4)
