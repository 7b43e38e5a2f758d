"""NumPy implementation of the sequential recommendation stack.

This module provides the Transformer and GRU encoders, sequence- and
model-level augmentation, the joint contrastive trainer, full-catalog
evaluation and the ``srma`` command-line runner.

Example:
    from srma_rec.rec_numpy_impl import (
        ExperimentConfig, SRMATrainer, build_model, evaluate, load_prepared,
    )
    from srma_rec.rec_api import Split

    config = ExperimentConfig.load("configs/desk.conf")
    dataset = load_prepared("data/prepared", config.data.maxlen)
    model = build_model(config, dataset.catalog)
    SRMATrainer(model, dataset, config, out_dir="runs/srma").fit()
    print(evaluate(model, dataset, Split.TEST))
"""

from .augment import Augmenter, ItemCorrelation, crop, insert, mask, random_augment, reorder, substitute
from .config import (
    AugmentConfig,
    DataConfig,
    EncoderConfig,
    ExperimentConfig,
    ModelAugConfig,
    SynthConfig,
    TrainConfig,
)
from .dataset import (
    DatasetStats,
    dataset_stats,
    generate_synthetic,
    k_core_filter,
    leave_one_out,
    load_prepared,
    pad_batch,
    pad_truncate,
    parse_interactions,
    read_interactions,
    sample_negatives,
    save_prepared,
    split_dataset,
    write_interactions,
)
from .diagnostics import GradCheckSummary, composed_transformer_check, run_gradcheck
from .encoders import GruEncoder, TransformerEncoder, gru_forward, last_hidden, transformer_forward
from .evaluation import evaluate, hr_at_k, ndcg_at_k, rank_target, summarize
from .experiment import AblationRow, RunResult, ablation_grid, run_ablation, run_experiment, write_ablation_csv
from .losses import info_nce, joint_loss, joint_objective, rec_loss
from .model import SRMAModel, build_complement_encoder, build_model, load_complement, save_complement
from .model_augment import (
    ComplementEncoder,
    FfnStack,
    NeuronMaskHook,
    complement_embedding,
    ffn_stack_with_layerdrop,
    neuron_mask_hook,
)
from .trainer import FitResult, RecTrainer, SRMATrainer, TrainingBatch, pretrain_complement

__version__ = "0.1.0"

__all__ = [
    # Configuration
    "ExperimentConfig",
    "DataConfig",
    "EncoderConfig",
    "AugmentConfig",
    "ModelAugConfig",
    "TrainConfig",
    "SynthConfig",

    # Data
    "parse_interactions",
    "read_interactions",
    "write_interactions",
    "k_core_filter",
    "leave_one_out",
    "split_dataset",
    "pad_truncate",
    "pad_batch",
    "sample_negatives",
    "generate_synthetic",
    "save_prepared",
    "load_prepared",
    "DatasetStats",
    "dataset_stats",

    # Sequence augmentation
    "crop",
    "mask",
    "reorder",
    "substitute",
    "insert",
    "random_augment",
    "Augmenter",
    "ItemCorrelation",

    # Encoders and model augmentation
    "TransformerEncoder",
    "GruEncoder",
    "transformer_forward",
    "gru_forward",
    "last_hidden",
    "NeuronMaskHook",
    "neuron_mask_hook",
    "FfnStack",
    "ffn_stack_with_layerdrop",
    "ComplementEncoder",
    "complement_embedding",
    "SRMAModel",
    "build_model",
    "build_complement_encoder",
    "save_complement",
    "load_complement",

    # Objectives
    "rec_loss",
    "info_nce",
    "joint_loss",
    "joint_objective",

    # Training and evaluation
    "TrainingBatch",
    "FitResult",
    "RecTrainer",
    "SRMATrainer",
    "pretrain_complement",
    "rank_target",
    "hr_at_k",
    "ndcg_at_k",
    "summarize",
    "evaluate",

    # Experiments
    "RunResult",
    "AblationRow",
    "run_experiment",
    "ablation_grid",
    "run_ablation",
    "write_ablation_csv",

    # Diagnostics
    "GradCheckSummary",
    "composed_transformer_check",
    "run_gradcheck",
]
