"""Core data types for the recommendation API."""

from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from srma_core import RngStream, Tensor, index

from .exceptions import DatasetError, EncoderError, LossError

PAD_ID = 0


class Mode(Enum):
    """Forward-pass mode."""
    TRAIN = "train"
    EVAL = "eval"


class EncoderKind(Enum):
    """Supported sequence encoders."""
    TRANSFORMER = "transformer"
    GRU = "gru"


class ComplementKind(Enum):
    """Pre-trained encoders usable for encoder complementing."""
    NONE = "none"
    TRANSFORMER_1_LAYER = "transformer-1-layer"
    GRU = "gru"


class AugmentOp(Enum):
    """Sequence-level data augmentations."""
    CROP = "crop"
    MASK = "mask"
    REORDER = "reorder"
    SUBSTITUTE = "substitute"
    INSERT = "insert"


class Split(Enum):
    """Held-out evaluation targets."""
    VALID = "valid"
    TEST = "test"


@dataclass(frozen=True)
class Interaction:
    """One (user, item, timestamp) record with external ids."""
    user_id: str
    item_id: str
    timestamp: int


@dataclass
class Catalog:
    """Contiguous re-indexing of kept users and items.

    Users map to ``0..|U|-1``; items map to ``1..|V|``. Id 0 is the pad token
    and ``|V|+1`` the mask token.
    """
    user_index: Dict[str, int] = field(default_factory=dict)
    item_index: Dict[str, int] = field(default_factory=dict)

    @property
    def num_users(self) -> int:
        return len(self.user_index)

    @property
    def num_items(self) -> int:
        return len(self.item_index)

    @property
    def pad_id(self) -> int:
        return PAD_ID

    @property
    def mask_id(self) -> int:
        return self.num_items + 1

    @property
    def table_rows(self) -> int:
        """Rows of an item embedding table: pad + items + mask."""
        return self.num_items + 2

    def is_item(self, item: int) -> bool:
        return 1 <= item <= self.num_items


@dataclass
class UserSequence:
    """Chronological internal item ids of one user with its leave-one-out targets."""
    user: int
    items: List[int]

    def __post_init__(self) -> None:
        if len(self.items) < 3:
            raise DatasetError(f"User {self.user} has {len(self.items)} items; leave-one-out needs 3")

    @property
    def train(self) -> List[int]:
        """Everything except the validation and test targets."""
        return self.items[:-2]

    @property
    def valid_target(self) -> int:
        return self.items[-2]

    @property
    def test_target(self) -> int:
        return self.items[-1]

    def context(self, split: Split) -> List[int]:
        """History used to predict the split's target."""
        return self.items[:-2] if split is Split.VALID else self.items[:-1]

    def target(self, split: Split) -> int:
        return self.valid_target if split is Split.VALID else self.test_target


@dataclass
class SplitDataset:
    """Per-user leave-one-out splits over a catalog."""
    catalog: Catalog
    users: List[UserSequence]
    maxlen: int

    def __post_init__(self) -> None:
        if self.maxlen < 1:
            raise DatasetError("maxlen must be at least 1")

    @property
    def num_interactions(self) -> int:
        return sum(len(u.items) for u in self.users)


@dataclass
class ForwardStreams:
    """Random streams consumed by one training-mode forward pass."""
    neuron_mask: Optional[RngStream] = None
    attention: Optional[RngStream] = None
    layer_drop: Optional[RngStream] = None


@dataclass
class HiddenStates:
    """Per-position hidden states of a left-padded batch.

    Args:
        states: ``(batch, maxlen, d)`` tensor
        lengths: true (unpadded) length of each sequence
    """
    states: Tensor
    lengths: npt.NDArray[np.int64]

    @property
    def batch(self) -> int:
        return self.states.shape[0]

    @property
    def maxlen(self) -> int:
        return self.states.shape[1]

    @property
    def width(self) -> int:
        return self.states.shape[2]

    def real_positions(self) -> npt.NDArray[np.bool_]:
        """``(batch, maxlen)`` mask, True where a position holds a real item."""
        positions = np.arange(self.maxlen)[None, :]
        return positions >= (self.maxlen - self.lengths)[:, None]

    def last_position(self) -> Tensor:
        """``(batch, d)`` states at the most recent position.

        Raises:
            EncoderError: If any sequence in the batch is empty
        """
        if self.batch and int(np.min(self.lengths)) < 1:
            raise EncoderError("Cannot pool an empty sequence")
        return index(self.states, (slice(None), -1, slice(None)))


@dataclass
class BatchViews:
    """``2N`` view embeddings; rows ``2u`` and ``2u+1`` are the views of sequence ``u``."""
    embeddings: Tensor

    def __post_init__(self) -> None:
        if self.embeddings.ndim != 2:
            raise LossError(f"Views must be a (2N, d) matrix, got shape {self.embeddings.shape}")
        if self.embeddings.shape[0] == 0 or self.embeddings.shape[0] % 2:
            raise LossError(f"Views need an even, positive row count, got {self.embeddings.shape[0]}")

    @property
    def num_sequences(self) -> int:
        return self.embeddings.shape[0] // 2


@dataclass
class LossReport:
    """Components of the joint objective L = L_rec + lambda * L_ssl."""
    loss_rec: float
    loss_ssl: float
    lam: float
    loss: float


@dataclass(frozen=True)
class RankResult:
    """1-based rank of a held-out target among eligible candidates."""
    user: int
    target: int
    rank: int


@dataclass
class RankingMetrics:
    """HR@k and NDCG@k for k in {5, 10, 20}."""
    hr5: float = 0.0
    hr10: float = 0.0
    hr20: float = 0.0
    ndcg5: float = 0.0
    ndcg10: float = 0.0
    ndcg20: float = 0.0
    users: int = 0

    COLUMNS: ClassVar[Tuple[str, ...]] = ("HR@5", "HR@10", "HR@20", "NDCG@5", "NDCG@10", "NDCG@20")

    def row(self) -> Tuple[float, float, float, float, float, float]:
        """Values in table order: HR@5, HR@10, HR@20, NDCG@5, NDCG@10, NDCG@20."""
        return (self.hr5, self.hr10, self.hr20, self.ndcg5, self.ndcg10, self.ndcg20)


@dataclass
class MetricsRecord:
    """One line of the metrics JSONL stream."""
    epoch: int
    split: str
    loss_rec: float
    loss_ssl: float
    loss: float
    metrics: RankingMetrics

    def to_json_dict(self) -> Dict[str, object]:
        return {
            "epoch": self.epoch,
            "loss_rec": self.loss_rec,
            "loss_ssl": self.loss_ssl,
            "loss": self.loss,
            "hr5": self.metrics.hr5,
            "hr10": self.metrics.hr10,
            "hr20": self.metrics.hr20,
            "ndcg5": self.metrics.ndcg5,
            "ndcg10": self.metrics.ndcg10,
            "ndcg20": self.metrics.ndcg20,
            "split": self.split,
        }
