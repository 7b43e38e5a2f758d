"""Recommendation API - Core interfaces for sequential recommendation.

This library provides the exceptions, domain types and the encoder interface
shared by every recommender implementation: leave-one-out splits, hidden
states, contrastive batch views, loss reports and ranking metrics.

Example:
    from srma_rec.rec_api import Mode, SplitDataset

    # Use an implementation
    from srma_rec.rec_numpy_impl import ExperimentConfig, build_model, load_prepared

    config = ExperimentConfig()
    dataset = load_prepared("runs/data", maxlen=config.data.maxlen)
    model = build_model(config, dataset.catalog)
    states = model.forward(ids, Mode.EVAL)
"""

from .exceptions import (
    AugmentationError,
    ComplementMissingError,
    ConfigError,
    DatasetError,
    EncoderError,
    EvaluationError,
    LossError,
    ModelAugmentationError,
    NoEligibleItemsError,
    NonFiniteLossError,
    ParseError,
    SRMAError,
    TrainingError,
)
from .interfaces import SequenceEncoder
from .types import (
    PAD_ID,
    AugmentOp,
    BatchViews,
    Catalog,
    ComplementKind,
    EncoderKind,
    ForwardStreams,
    HiddenStates,
    Interaction,
    LossReport,
    MetricsRecord,
    Mode,
    RankingMetrics,
    RankResult,
    Split,
    SplitDataset,
    UserSequence,
)

__version__ = "0.1.0"

__all__ = [
    # Main interface
    "SequenceEncoder",

    # Enumerations
    "Mode",
    "EncoderKind",
    "ComplementKind",
    "AugmentOp",
    "Split",

    # Data types
    "PAD_ID",
    "Interaction",
    "Catalog",
    "UserSequence",
    "SplitDataset",
    "ForwardStreams",
    "HiddenStates",
    "BatchViews",
    "LossReport",
    "RankResult",
    "RankingMetrics",
    "MetricsRecord",

    # Exceptions
    "SRMAError",
    "ConfigError",
    "DatasetError",
    "ParseError",
    "NoEligibleItemsError",
    "AugmentationError",
    "EncoderError",
    "ModelAugmentationError",
    "ComplementMissingError",
    "LossError",
    "TrainingError",
    "NonFiniteLossError",
    "EvaluationError",
]
