"""Command-line experiment runner.

Usage:
    srma synth --out data/raw.tsv
    srma prepare --input data/raw.tsv --out data/prepared
    srma train --data data/prepared --out runs/srma --config configs/desk.conf
    srma evaluate --data data/prepared --checkpoint runs/srma/best.ckpt --split test
    srma ablate --data data/prepared --axis components --seeds 1,2,3 --out runs/ablate
    srma gradcheck

Failures print one line ``error code=<Exception> message="<text>"`` to
stderr and exit with status 2.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from dotenv import load_dotenv

from srma_core import DiffCoreError, load_params

from ..rec_api.exceptions import ConfigError, SRMAError
from ..rec_api.types import RankingMetrics, Split, SplitDataset
from .config import ExperimentConfig
from .dataset import (
    dataset_stats,
    generate_synthetic,
    load_prepared,
    read_interactions,
    save_prepared,
    split_dataset,
    write_interactions,
)
from .diagnostics import run_gradcheck
from .evaluation import evaluate
from .experiment import (
    ABLATION_AXES,
    COMPLEMENT_CHECKPOINT,
    run_ablation,
    run_experiment,
    write_ablation_csv,
)
from .model import build_model, save_complement
from .trainer import pretrain_complement

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_ERROR = 2


def _config(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig.load(args.config, args.set)


def _data_dir(args: argparse.Namespace) -> Path:
    if not args.data:
        raise ConfigError("No dataset directory: pass --data or set SRMA_DATA_DIR")
    return Path(args.data)


def _dataset(args: argparse.Namespace, config: ExperimentConfig) -> SplitDataset:
    return load_prepared(_data_dir(args), config.data.maxlen)


def format_table(metrics: RankingMetrics) -> str:
    """Fixed-order metric table: a header row and a value row."""
    header = " ".join(f"{name:>8}" for name in RankingMetrics.COLUMNS)
    values = " ".join(f"{value:>8.4f}" for value in metrics.row())
    return f"{header}\n{values}"


def cmd_synth(args: argparse.Namespace) -> int:
    synth = _config(args).synth
    interactions = generate_synthetic(synth.users, synth.items, synth.length, synth.concentration, synth.seed)
    count = write_interactions(args.out, interactions)
    logger.info(f"Wrote {count} synthetic interactions to {args.out}")
    return 0


def cmd_prepare(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = split_dataset(read_interactions(args.input), config.data.kcore, config.data.maxlen)
    save_prepared(args.out, dataset)
    logger.info(f"Prepared {dataset.catalog.num_users} users and {dataset.catalog.num_items} items into {args.out}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    stats = dataset_stats(_dataset(args, _config(args)))
    print(f"users={stats.users} items={stats.items} interactions={stats.interactions} "
          f"avg_length={stats.avg_length:.2f} density={stats.density:.4%}")
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    config = _config(args)
    if not config.modelaug.complement_enabled:
        raise ConfigError("Set modelaug.complement to transformer-1-layer or gru to pre-train a complement")
    dataset = _dataset(args, config)
    complement = pretrain_complement(dataset, config.modelaug.complement, config)
    target = Path(args.out) / COMPLEMENT_CHECKPOINT
    config.save(args.out)
    save_complement(target, complement)
    logger.info(f"Saved frozen complement to {target}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = _dataset(args, config)
    config.save(args.out)
    result = run_experiment(config, dataset, args.out, resume=args.resume)
    print(format_table(result.test))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = _dataset(args, config)
    model = build_model(config, dataset.catalog)
    load_params(args.checkpoint, model.params)
    metrics = evaluate(model, dataset, Split(args.split), config.train.batch_size)
    print(format_table(metrics))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    summary = run_gradcheck(num_cases=args.cases, seed=args.seed)
    print(summary.line())
    return 0 if summary.passed else EXIT_FAILURE


def _parse_seeds(text: Optional[str]) -> List[int]:
    if not text:
        return []
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--seeds must be comma-separated integers: {text!r}") from e


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = _dataset(args, config)
    rows = run_ablation(config, dataset, args.axis, _parse_seeds(args.seeds), args.out)
    if args.out:
        target = Path(args.out) / f"ablation_{args.axis}.csv"
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="") as stream:
            write_ablation_csv(stream, rows)
        logger.info(f"Wrote {len(rows)} rows to {target}")
    write_ablation_csv(sys.stdout, rows)
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "synth": cmd_synth,
    "prepare": cmd_prepare,
    "stats": cmd_stats,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key")
    common.add_argument("--log-level", default=os.getenv("SRMA_LOG_LEVEL", "INFO"), help="Logging level")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", default=os.getenv("SRMA_DATA_DIR"), help="Prepared dataset directory")

    parser = argparse.ArgumentParser(prog="srma", description="Contrastive sequential recommendation with model augmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="Generate a synthetic Markov-chain dataset")
    p.add_argument("--out", required=True, help="Output TSV path")

    p = sub.add_parser("prepare", parents=[common], help="k-core filter and leave-one-out split a TSV")
    p.add_argument("--input", required=True, help="user<TAB>item<TAB>timestamp file")
    p.add_argument("--out", required=True, help="Prepared dataset directory")

    sub.add_parser("stats", parents=[common, data], help="Summarise a prepared dataset")

    p = sub.add_parser("pretrain", parents=[common, data], help="Pre-train and freeze the complement encoder")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("train", parents=[common, data], help="Train, validate and test a model")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--resume", action="store_true", help="Continue from last.ckpt in --out")

    p = sub.add_parser("evaluate", parents=[common, data], help="Evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True, help="Parameter checkpoint")
    p.add_argument("--split", choices=[s.value for s in Split], default=Split.TEST.value)

    p = sub.add_parser("gradcheck", parents=[common], help="Verify analytic gradients")
    p.add_argument("--cases", type=int, default=112, help="Randomized op cases")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate", parents=[common, data], help="Run an ablation grid and emit CSV")
    p.add_argument("--axis", required=True, choices=ABLATION_AXES)
    p.add_argument("--seeds", help="Comma-separated seeds averaged per row")
    p.add_argument("--out", help="Directory for per-run outputs and the CSV")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=str(args.log_level).upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SRMAError, DiffCoreError) as e:
        message = str(e).replace('"', "'")
        print(f'error code={type(e).__name__} message="{message}"', file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
