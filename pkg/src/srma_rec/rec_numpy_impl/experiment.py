"""End-to-end experiment runs and ablation grids.

A run is ``(complement pretraining) -> joint training -> test evaluation``
and depends only on the dataset, the config and ``train.seed``.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

from ..rec_api.exceptions import ConfigError
from ..rec_api.types import ComplementKind, RankingMetrics, Split, SplitDataset
from .config import ExperimentConfig
from .evaluation import evaluate
from .model import SRMAModel, build_model, load_complement, save_complement
from .model_augment import ComplementEncoder
from .trainer import FitResult, SRMATrainer, pretrain_complement

logger = logging.getLogger(__name__)

COMPLEMENT_CHECKPOINT = "complement.ckpt"

Setting = Tuple[str, Dict[str, str]]


@dataclass
class RunResult:
    """A trained model with its fit history and test metrics."""
    model: SRMAModel
    fit: FitResult
    test: RankingMetrics


@dataclass
class AblationRow:
    """Seed-averaged test metrics of one grid setting."""
    axis: str
    setting: str
    metrics: RankingMetrics
    seeds: int


def resolve_complement(
    config: ExperimentConfig,
    dataset: SplitDataset,
    out_dir: Optional[Union[str, Path]] = None,
) -> Optional[ComplementEncoder]:
    """Load ``modelaug.complement_ckpt`` or pre-train the configured complement.

    A freshly trained complement is saved to ``out_dir/complement.ckpt``.
    """
    modelaug = config.modelaug
    if not modelaug.complement_enabled:
        return None
    if modelaug.complement_ckpt:
        logger.info(f"Loading frozen {modelaug.complement.value} complement from {modelaug.complement_ckpt}")
        return load_complement(modelaug.complement_ckpt, modelaug.complement, config, dataset.catalog)
    complement = pretrain_complement(dataset, modelaug.complement, config)
    if out_dir is not None:
        save_complement(Path(out_dir) / COMPLEMENT_CHECKPOINT, complement)
    return complement


def run_experiment(
    config: ExperimentConfig,
    dataset: SplitDataset,
    out_dir: Optional[Union[str, Path]] = None,
    resume: bool = False,
) -> RunResult:
    """Train with early stopping on validation, then evaluate the best model on test."""
    model = build_model(config, dataset.catalog)
    complement = resolve_complement(config, dataset, out_dir)
    trainer = SRMATrainer(model, dataset, config, out_dir, complement=complement)
    fit = trainer.fit(resume=resume)
    test = evaluate(model, dataset, Split.TEST, config.train.batch_size)
    logger.info(f"Test HR@10={test.hr10:.4f} NDCG@10={test.ndcg10:.4f} (best epoch {fit.best_epoch})")
    return RunResult(model=model, fit=fit, test=test)


def _complement_or_default(config: ExperimentConfig) -> str:
    """The configured complement kind, or the one-layer Transformer when none is set."""
    kind = config.modelaug.complement
    return (kind if kind is not ComplementKind.NONE else ComplementKind.TRANSFORMER_1_LAYER).value


def ablation_grid(axis: str, config: ExperimentConfig) -> List[Setting]:
    """Named override sets for one ablation axis.

    Raises:
        ConfigError: If ``axis`` is unknown
    """
    if axis == "p":
        return [(f"{p / 10:.1f}", {"modelaug.p": f"{p / 10:.1f}"}) for p in range(10)]
    if axis == "K_M":
        return [
            (f"K={k},M={m}", {"modelaug.K": str(k), "modelaug.M": str(m), "modelaug.stack": "true"})
            for k in range(1, 5)
            for m in range(k)
        ]
    if axis == "gamma":
        kind = _complement_or_default(config)
        return [
            (str(g), {"modelaug.gamma": str(g), "modelaug.complement": kind})
            for g in (0.005, 0.01, 0.05, 0.1, 0.5, 1.0)
        ]
    if axis == "complement":
        return [(kind.value, {"modelaug.complement": kind.value}) for kind in ComplementKind]
    if axis == "components":
        full = {"modelaug.stack": "true", "modelaug.complement": _complement_or_default(config)}
        return [
            ("full", full),
            ("no-data-aug", {**full, "aug.enabled": "false"}),
            ("no-model-aug", {
                "modelaug.stack": "true", "modelaug.M": "0", "modelaug.p": "0.0", "modelaug.complement": "none",
            }),
            ("rec-only", {"train.lambda": "0.0"}),
        ]
    if axis == "cl4srec":
        cl4srec = {"modelaug.stack": "false", "modelaug.complement": "none"}
        return [
            ("cl4srec", cl4srec),
            ("cl4srec-p0", {**cl4srec, "modelaug.p": "0.0"}),
            ("cl4srec-no-data-aug", {**cl4srec, "aug.enabled": "false"}),
            ("srma", {"modelaug.stack": "true", "modelaug.complement": _complement_or_default(config)}),
        ]
    raise ConfigError(f"Unknown ablation axis: {axis}")


ABLATION_AXES = ("p", "K_M", "gamma", "complement", "components", "cl4srec")


def _mean_metrics(runs: Sequence[RankingMetrics]) -> RankingMetrics:
    count = len(runs)
    return RankingMetrics(
        hr5=sum(m.hr5 for m in runs) / count,
        hr10=sum(m.hr10 for m in runs) / count,
        hr20=sum(m.hr20 for m in runs) / count,
        ndcg5=sum(m.ndcg5 for m in runs) / count,
        ndcg10=sum(m.ndcg10 for m in runs) / count,
        ndcg20=sum(m.ndcg20 for m in runs) / count,
        users=runs[0].users,
    )


def run_ablation(
    config: ExperimentConfig,
    dataset: SplitDataset,
    axis: str,
    seeds: Sequence[int] = (),
    out_dir: Optional[Union[str, Path]] = None,
) -> List[AblationRow]:
    """Run every setting of ``axis`` once per seed and average test metrics.

    Args:
        seeds: Values for ``train.seed``; empty uses the configured seed
        out_dir: Each run writes into ``out_dir/<setting>/seed<seed>``
    """
    seed_list = list(seeds) or [config.train.seed]
    rows: List[AblationRow] = []
    for setting, overrides in ablation_grid(axis, config):
        runs: List[RankingMetrics] = []
        for seed in seed_list:
            run_config = config.with_values({**overrides, "train.seed": str(seed)})
            run_dir = Path(out_dir) / setting / f"seed{seed}" if out_dir is not None else None
            if run_dir is not None:
                run_config.save(run_dir)
            runs.append(run_experiment(run_config, dataset, run_dir).test)
        row = AblationRow(axis=axis, setting=setting, metrics=_mean_metrics(runs), seeds=len(seed_list))
        logger.info(f"Ablation {axis}={setting}: NDCG@10={row.metrics.ndcg10:.4f} over {row.seeds} seeds")
        rows.append(row)
    return rows


def write_ablation_csv(stream: TextIO, rows: Sequence[AblationRow]) -> None:
    """One row per setting: axis, setting, then the six metrics to 4 decimals."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["axis", "setting", *RankingMetrics.COLUMNS])
    for row in rows:
        writer.writerow([row.axis, row.setting, *(f"{value:.4f}" for value in row.metrics.row())])
