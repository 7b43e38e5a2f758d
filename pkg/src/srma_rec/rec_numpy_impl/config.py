"""Configuration for recommendation experiments.

Every tunable is a field of a validated section dataclass. Files hold one
``section.key = value`` per line with ``#`` comments and are parsed with
python-dotenv; ``--set key=value`` overrides are applied last.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union, get_type_hints

from dotenv import dotenv_values

from ..rec_api.exceptions import ConfigError
from ..rec_api.types import AugmentOp, ComplementKind, EncoderKind

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG_NAME = "config.effective"


def _key(name: str) -> Dict[str, str]:
    return {"key": name}


@dataclass
class DataConfig:
    """Dataset preparation settings.

    Args:
        maxlen: Fixed input length after padding/truncation (default: 50)
        kcore: Minimum interactions per kept user and item (default: 5)
        num_negatives: Negatives sampled per position for the rec loss (default: 1)
    """
    maxlen: int = 50
    kcore: int = 5
    num_negatives: int = 1

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.maxlen < 1:
            raise ConfigError("data.maxlen must be at least 1")
        if self.kcore < 1:
            raise ConfigError("data.kcore must be at least 1")
        if self.num_negatives < 1:
            raise ConfigError("data.num_negatives must be at least 1")


@dataclass
class EncoderConfig:
    """Sequence encoder architecture.

    Args:
        kind: ``transformer`` or ``gru`` (default: transformer)
        layers: Transformer blocks (default: 2)
        hidden: Hidden and item-embedding dimension d (default: 64)
        heads: Attention heads; must divide ``hidden`` (default: 2)
        attn_dropout: Dropout on attention weights (default: 0.2)
        ln_eps: Layer-norm epsilon (default: 1e-12)
        gru_layers: Stacked GRU layers (default: 1)
        init_std: Standard deviation of the normal weight init (default: 0.02)
    """
    kind: EncoderKind = EncoderKind.TRANSFORMER
    layers: int = 2
    hidden: int = 64
    heads: int = 2
    attn_dropout: float = 0.2
    ln_eps: float = 1e-12
    gru_layers: int = 1
    init_std: float = 0.02

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.layers < 1:
            raise ConfigError("encoder.layers must be at least 1")
        if self.hidden < 1:
            raise ConfigError("encoder.hidden must be positive")
        if self.heads < 1 or self.hidden % self.heads:
            raise ConfigError(f"encoder.hidden ({self.hidden}) must be divisible by encoder.heads ({self.heads})")
        if not 0.0 <= self.attn_dropout < 1.0:
            raise ConfigError("encoder.attn_dropout must lie in [0, 1)")
        if self.ln_eps <= 0:
            raise ConfigError("encoder.ln_eps must be positive")
        if self.gru_layers < 1:
            raise ConfigError("encoder.gru_layers must be at least 1")
        if self.init_std <= 0:
            raise ConfigError("encoder.init_std must be positive")


@dataclass
class AugmentConfig:
    """Sequence-level data augmentation.

    Args:
        enabled: Build views from augmented sequences (default: true)
        ops: Operators sampled uniformly per view (default: crop,mask,reorder)
        crop_ratio: Kept fraction for crop, in (0, 1] (default: 0.6)
        mask_ratio: Masked fraction, in [0, 1) (default: 0.3)
        reorder_ratio: Shuffled segment fraction, in (0, 1] (default: 0.2)
        substitute_ratio: Substituted fraction, in [0, 1) (default: 0.2)
        insert_ratio: Fraction of positions followed by an insertion, in [0, 1) (default: 0.2)
        corr_window: Co-occurrence window of the item correlation table (default: 3)
        corr_topk: Correlates kept per item (default: 5)
    """
    enabled: bool = True
    ops: Tuple[AugmentOp, ...] = (AugmentOp.CROP, AugmentOp.MASK, AugmentOp.REORDER)
    crop_ratio: float = 0.6
    mask_ratio: float = 0.3
    reorder_ratio: float = 0.2
    substitute_ratio: float = 0.2
    insert_ratio: float = 0.2
    corr_window: int = 3
    corr_topk: int = 5

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.enabled and not self.ops:
            raise ConfigError("aug.ops must not be empty when augmentation is enabled")
        if len(set(self.ops)) != len(self.ops):
            raise ConfigError("aug.ops contains duplicates")
        if not 0.0 < self.crop_ratio <= 1.0:
            raise ConfigError("aug.crop_ratio must lie in (0, 1]")
        if not 0.0 < self.reorder_ratio <= 1.0:
            raise ConfigError("aug.reorder_ratio must lie in (0, 1]")
        for name in ("mask_ratio", "substitute_ratio", "insert_ratio"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"aug.{name} must lie in [0, 1)")
        if self.corr_window < 1 or self.corr_topk < 1:
            raise ConfigError("aug.corr_window and aug.corr_topk must be at least 1")

    @property
    def needs_correlation(self) -> bool:
        return self.enabled and (AugmentOp.SUBSTITUTE in self.ops or AugmentOp.INSERT in self.ops)


@dataclass
class ModelAugConfig:
    """Model-level augmentation.

    Args:
        p: Neuron-mask probability shared by every FFN layer (default: 0.3)
        stack_layers: K, FFN layers stacked after the encoder (default: 2)
        dropped_layers: M, stack layers skipped per training forward (default: 1)
        stack: Attach the FFN stack at all (default: true)
        gamma: Scale of the complement embedding (default: 0.1)
        complement: Pre-trained complement encoder kind (default: none)
        complement_epochs: Pre-training epochs of the complement (default: 10)
        complement_ckpt: Frozen complement checkpoint to load instead of pre-training
    """
    p: float = 0.3
    stack_layers: int = field(default=2, metadata=_key("K"))
    dropped_layers: int = field(default=1, metadata=_key("M"))
    stack: bool = True
    gamma: float = 0.1
    complement: ComplementKind = ComplementKind.NONE
    complement_epochs: int = 10
    complement_ckpt: Optional[str] = None

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if not 0.0 <= self.p < 1.0:
            raise ConfigError("modelaug.p must lie in [0, 1)")
        if not 1 <= self.stack_layers <= 4:
            raise ConfigError("modelaug.K must lie in {1, 2, 3, 4}")
        if not 0 <= self.dropped_layers < self.stack_layers:
            raise ConfigError(f"modelaug.M ({self.dropped_layers}) must satisfy 0 <= M < K ({self.stack_layers})")
        if self.gamma < 0:
            raise ConfigError("modelaug.gamma must be non-negative")
        if self.complement_epochs < 0:
            raise ConfigError("modelaug.complement_epochs must be non-negative")

    @property
    def complement_enabled(self) -> bool:
        return self.complement is not ComplementKind.NONE


@dataclass
class TrainConfig:
    """Optimisation and training loop.

    Args:
        lam: Weight of the contrastive loss, key ``train.lambda`` (default: 0.1)
        epochs: Epoch budget (default: 100)
        batch_size: Sequences per step N (default: 256)
        lr: Adam learning rate (default: 1e-3)
        seed: Seed shared by every random stream (default: 2022)
        patience: Epochs without validation NDCG@10 gain before stopping (default: 10)
        clip_norm: Global gradient-norm clip (default: 5.0)
        rec_layer_drop: Drop stack layers in the rec forward too (default: false)
    """
    lam: float = field(default=0.1, metadata=_key("lambda"))
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 2022
    patience: int = 10
    clip_norm: float = 5.0
    rec_layer_drop: bool = False

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.lam < 0:
            raise ConfigError("train.lambda must be non-negative")
        if self.epochs < 1:
            raise ConfigError("train.epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be at least 1")
        if self.lr <= 0:
            raise ConfigError("train.lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("train.beta1 and train.beta2 must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ConfigError("train.adam_eps must be positive")
        if self.patience < 1:
            raise ConfigError("train.patience must be at least 1")
        if self.clip_norm <= 0:
            raise ConfigError("train.clip_norm must be positive")


@dataclass
class SynthConfig:
    """Synthetic Markov-chain dataset.

    Args:
        users: Number of users (default: 500)
        items: Catalog size, at least 2 (default: 100)
        length: Interactions per user (default: 20)
        concentration: Symmetric Dirichlet concentration of transition rows (default: 0.05)
        seed: Generator seed (default: 2022)
    """
    users: int = 500
    items: int = 100
    length: int = 20
    concentration: float = 0.05
    seed: int = 2022

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.users < 1:
            raise ConfigError("synth.users must be at least 1")
        if self.items < 2:
            raise ConfigError("synth.items must be at least 2")
        if self.length < 1:
            raise ConfigError("synth.length must be at least 1")
        if self.concentration <= 0:
            raise ConfigError("synth.concentration must be positive")


SectionConfig = Union[DataConfig, EncoderConfig, AugmentConfig, ModelAugConfig, TrainConfig, SynthConfig]


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_value(key: str, raw: str, hint: Any) -> Any:
    text = raw.strip()
    try:
        if hint is bool:
            return _parse_bool(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint == Optional[str]:
            return text or None
        if hint == Tuple[AugmentOp, ...]:
            return tuple(AugmentOp(part.strip()) for part in text.split(",") if part.strip())
        if isinstance(hint, type) and issubclass(hint, Enum):
            return hint(text)
        return text
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {raw!r}") from e


@dataclass
class ExperimentConfig:
    """Every tunable of an experiment, grouped by section."""
    data: DataConfig = field(default_factory=DataConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    aug: AugmentConfig = field(default_factory=AugmentConfig)
    modelaug: ModelAugConfig = field(default_factory=ModelAugConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    SECTIONS = ("data", "encoder", "aug", "modelaug", "train", "synth")

    @staticmethod
    def _section_keys(section: SectionConfig) -> Dict[str, str]:
        """Map dotted-key suffix to field name."""
        return {f.metadata.get("key", f.name): f.name for f in dataclasses.fields(section)}

    def to_mapping(self) -> Dict[str, str]:
        """Flatten to ``section.key -> text`` in declaration order."""
        flat: Dict[str, str] = {}
        for name in self.SECTIONS:
            section = getattr(self, name)
            for key, attr in self._section_keys(section).items():
                flat[f"{name}.{key}"] = _format_value(getattr(section, attr))
        return flat

    def with_values(self, values: Mapping[str, Optional[str]]) -> "ExperimentConfig":
        """Return a copy with dotted-key values applied.

        Raises:
            ConfigError: On unknown keys, missing values or invalid values
        """
        grouped: Dict[str, Dict[str, Any]] = {}
        for dotted, raw in values.items():
            section_name, _, key = dotted.partition(".")
            if section_name not in self.SECTIONS or not key:
                raise ConfigError(f"Unknown config key: {dotted}")
            section = getattr(self, section_name)
            keys = self._section_keys(section)
            if key not in keys:
                raise ConfigError(f"Unknown config key: {dotted}")
            if raw is None:
                raise ConfigError(f"Missing value for {dotted}")
            attr = keys[key]
            hint = get_type_hints(type(section))[attr]
            grouped.setdefault(section_name, {})[attr] = _parse_value(dotted, raw, hint)

        sections = {name: getattr(self, name) for name in self.SECTIONS}
        for name, changes in grouped.items():
            sections[name] = dataclasses.replace(sections[name], **changes)
            logger.debug(f"Config section {name} updated: {changes}")
        return ExperimentConfig(**sections)

    def with_overrides(self, overrides: Iterable[str]) -> "ExperimentConfig":
        """Apply ``key=value`` strings, as given to ``--set``."""
        values: Dict[str, Optional[str]] = {}
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"Override must look like key=value: {item!r}")
            values[key.strip()] = value.strip()
        return self.with_values(values)

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> "ExperimentConfig":
        """Defaults, then the config file, then overrides.

        Raises:
            ConfigError: If the file is missing or any key or value is invalid
        """
        config = cls()
        if path is not None:
            source = Path(path)
            if not source.is_file():
                raise ConfigError(f"Config file not found: {source}")
            config = config.with_values(dotenv_values(source, interpolate=False, encoding="utf-8"))
            logger.debug(f"Loaded config from {source}")
        return config.with_overrides(overrides)

    def dumps(self) -> str:
        lines: List[str] = []
        previous = ""
        for key, value in self.to_mapping().items():
            section = key.split(".", 1)[0]
            if previous and section != previous:
                lines.append("")
            previous = section
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def save(self, out_dir: Union[str, Path]) -> Path:
        """Write the effective config into ``out_dir``."""
        target = Path(out_dir) / EFFECTIVE_CONFIG_NAME
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(self.dumps(), encoding="utf-8")
        except OSError as e:
            logger.error(f"Failed to write {target}: {e}")
            raise ConfigError(f"Cannot write {target}: {e}") from e
        return target
