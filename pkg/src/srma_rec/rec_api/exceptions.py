"""Custom exceptions for the recommendation API."""

from typing import Optional


class SRMAError(Exception):
    """Base exception for recommendation errors."""
    pass


class ConfigError(SRMAError, ValueError):
    """Invalid, unknown or unparsable configuration."""
    pass


class DatasetError(SRMAError):
    """Errors while ingesting or splitting interaction data."""
    pass


class ParseError(DatasetError):
    """Malformed interaction record."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class NoEligibleItemsError(DatasetError):
    """Negative sampling has no item left to draw."""
    pass


class AugmentationError(SRMAError):
    """Errors in sequence-level augmentation."""
    pass


class EncoderError(SRMAError):
    """Errors in encoder construction or forward passes."""
    pass


class ModelAugmentationError(SRMAError):
    """Errors in model-level augmentation."""
    pass


class ComplementMissingError(ModelAugmentationError):
    """Encoder complementing is enabled but no pre-trained encoder is available."""
    pass


class LossError(SRMAError):
    """Errors computing training objectives."""
    pass


class TrainingError(SRMAError):
    """Errors in the training loop."""
    pass


class NonFiniteLossError(TrainingError):
    """A training step produced a non-finite loss."""

    def __init__(self, message: str, dump_path: Optional[str] = None) -> None:
        self.dump_path = dump_path
        suffix = f" (batch dumped to {dump_path})" if dump_path else ""
        super().__init__(f"{message}{suffix}")


class EvaluationError(SRMAError):
    """Errors in ranking evaluation."""
    pass
