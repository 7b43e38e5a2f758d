"""Training loops: the plain next-item trainer and the joint contrastive trainer.

Every random draw comes from a stream labelled by purpose, epoch and step
(``negatives/e3/s7``, ``neuron-mask/view1/e3/s7``, ...), so a run is a
deterministic function of the data, the config and the seed, and a run
resumed from ``last.ckpt`` replays the remaining epochs exactly.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from srma_core import (
    AdamState,
    NonFiniteError,
    RngStream,
    Tensor,
    adam_step,
    checkpoint,
    clip_grad_norm,
    reshape,
    save_params,
    stack,
)

from ..rec_api.exceptions import NonFiniteLossError, TrainingError
from ..rec_api.interfaces import SequenceEncoder
from ..rec_api.types import (
    BatchViews,
    ComplementKind,
    ForwardStreams,
    LossReport,
    MetricsRecord,
    Mode,
    RankingMetrics,
    Split,
    SplitDataset,
    UserSequence,
)
from .augment import Augmenter, ItemCorrelation
from .config import ExperimentConfig
from .dataset import pad_batch, sample_negatives, training_pairs
from .evaluation import evaluate
from .losses import info_nce, joint_loss, joint_objective, rec_loss
from .model import SRMAModel, build_complement_encoder
from .model_augment import ComplementEncoder, complement_embedding

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"


@dataclass
class TrainingBatch:
    """Padded arrays for one optimisation step.

    ``inputs``/``targets`` are the user's training prefix shifted by one;
    ``view1``/``view2`` are the two augmented variants used for contrast.
    """
    users: List[int]
    inputs: npt.NDArray[np.int64]
    targets: npt.NDArray[np.int64]
    negatives: npt.NDArray[np.int64]
    view1: Optional[npt.NDArray[np.int64]] = None
    view2: Optional[npt.NDArray[np.int64]] = None

    @property
    def size(self) -> int:
        return len(self.users)


@dataclass
class FitResult:
    """Outcome of :meth:`RecTrainer.fit`."""
    history: List[MetricsRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_ndcg10: float = -1.0
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def _pack_float64(value: float) -> npt.NDArray[np.float32]:
    return np.array([value], dtype=np.float64).view(np.float32)


def _unpack_float64(words: npt.NDArray[np.float32]) -> float:
    return float(np.ascontiguousarray(words, dtype=np.float32).view(np.float64)[0])


class RecTrainer:
    """Optimises the next-item log-likelihood alone.

    Args:
        model: Encoder (plus optional FFN stack) whose parameters are trained
        dataset: Leave-one-out split; users with a training prefix shorter
            than 2 have no next-item pair and are skipped
        config: Experiment configuration
        out_dir: Where metrics and checkpoints go; ``None`` keeps everything in memory
        label_prefix: Prepended to every stream label
        epochs: Overrides ``config.train.epochs``
    """

    def __init__(
        self,
        model: SequenceEncoder,
        dataset: SplitDataset,
        config: ExperimentConfig,
        out_dir: Optional[Union[str, Path]] = None,
        label_prefix: str = "",
        epochs: Optional[int] = None,
    ) -> None:
        self.model = model
        self.params = model.params
        self.dataset = dataset
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.label_prefix = label_prefix
        self.epochs = config.train.epochs if epochs is None else epochs
        if self.epochs < 0:
            raise TrainingError("epochs must be non-negative")
        train = config.train
        self.adam = AdamState(lr=train.lr, beta1=train.beta1, beta2=train.beta2, eps=train.adam_eps)
        self.epoch = 0
        self.best_ndcg10 = -1.0
        self.bad_epochs = 0
        self._best_arrays: Optional[Dict[str, npt.NDArray[Any]]] = None

        self.users: List[UserSequence] = [u for u in dataset.users if len(u.train) >= 2]
        skipped = len(dataset.users) - len(self.users)
        if skipped:
            logger.warning(f"Skipping {skipped} users whose training prefix has fewer than 2 items")
        if not self.users:
            raise TrainingError("The training split is empty")

    # Streams and batches

    def stream(self, purpose: str, epoch: int, step: int) -> RngStream:
        return RngStream(self.config.train.seed, f"{self.label_prefix}{purpose}/e{epoch}/s{step}")

    def batches(self, epoch: int) -> List[List[UserSequence]]:
        """Shuffled batches of users; the order depends only on the seed and the epoch."""
        order = RngStream(self.config.train.seed, f"{self.label_prefix}shuffle").fork(epoch).permutation(self.users)
        size = self.config.train.batch_size
        return [order[i:i + size] for i in range(0, len(order), size)]

    def make_batch(self, users: List[UserSequence], epoch: int, step: int) -> TrainingBatch:
        maxlen = self.model.maxlen
        pairs = [training_pairs(u.train) for u in users]
        inputs, _ = pad_batch([p[0] for p in pairs], maxlen)
        targets, _ = pad_batch([p[1] for p in pairs], maxlen)
        n = self.config.data.num_negatives
        rng = self.stream("negatives", epoch, step)
        num_items = self.dataset.catalog.num_items
        negatives = np.stack(
            [sample_negatives(rng, u.train, num_items, maxlen * n).reshape(maxlen, n) for u in users]
        )
        return TrainingBatch(users=[u.user for u in users], inputs=inputs, targets=targets, negatives=negatives)

    # Objective

    def rec_streams(self, epoch: int, step: int) -> ForwardStreams:
        layer_drop = self.stream("layer-drop/rec", epoch, step) if self.config.train.rec_layer_drop else None
        return ForwardStreams(
            neuron_mask=self.stream("neuron-mask/rec", epoch, step),
            attention=self.stream("attention/rec", epoch, step),
            layer_drop=layer_drop,
        )

    def rec_objective(self, batch: TrainingBatch, epoch: int, step: int) -> Tensor:
        hidden = self.model.forward(batch.inputs, Mode.TRAIN, self.rec_streams(epoch, step))
        return rec_loss(hidden, batch.targets, batch.negatives, self.model.item_table)

    def compute_loss(self, batch: TrainingBatch, epoch: int, step: int) -> Tuple[Tensor, LossReport]:
        rec = self.rec_objective(batch, epoch, step)
        return rec, joint_loss(rec.item(), 0.0, 0.0)

    # Steps

    def _dump_batch(self, batch: TrainingBatch, epoch: int, step: int) -> Optional[str]:
        if self.out_dir is None:
            return None
        path = self.out_dir / f"nonfinite_batch_e{epoch}_s{step}.json"
        payload = {"epoch": epoch, "step": step, "users": batch.users, "inputs": batch.inputs.tolist()}
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(payload), encoding="utf-8")
        except OSError as e:
            logger.error(f"Failed to dump non-finite batch: {e}")
            return None
        return str(path)

    def train_step(self, batch: TrainingBatch, epoch: int, step: int) -> LossReport:
        """Forward, backward, clip and one Adam update.

        Raises:
            NonFiniteLossError: If any value of the step is NaN or infinite
        """
        self.params.zero_grad()
        try:
            loss, report = self.compute_loss(batch, epoch, step)
            loss.backward()
        except NonFiniteError as e:
            dump = self._dump_batch(batch, epoch, step)
            logger.error(f"Non-finite value at epoch {epoch} step {step}: {e}")
            raise NonFiniteLossError(f"Non-finite loss at epoch {epoch} step {step}", dump) from e
        clip_grad_norm(self.params, self.config.train.clip_norm)
        adam_step(self.params, self.adam)
        logger.debug(f"e{epoch} s{step}: loss={report.loss:.6f} rec={report.loss_rec:.6f} ssl={report.loss_ssl:.6f}")
        return report

    def train_epoch(self, epoch: int) -> LossReport:
        """Run every batch of ``epoch``; returns the mean report."""
        reports = [
            self.train_step(self.make_batch(users, epoch, step), epoch, step)
            for step, users in enumerate(self.batches(epoch))
        ]
        count = len(reports)
        return LossReport(
            loss_rec=sum(r.loss_rec for r in reports) / count,
            loss_ssl=sum(r.loss_ssl for r in reports) / count,
            lam=reports[0].lam,
            loss=sum(r.loss for r in reports) / count,
        )

    # State

    def state_arrays(self) -> Dict[str, npt.NDArray[Any]]:
        """Parameters, Adam moments and loop counters for ``last.ckpt``."""
        arrays: Dict[str, npt.NDArray[Any]] = {}
        for name, tensor in self.params.trainable_items():
            arrays[name] = np.array(tensor.values, copy=True)
        for name, moment in self.adam.first_moment.items():
            arrays[f"adam/m/{name}"] = moment
        for name, moment in self.adam.second_moment.items():
            arrays[f"adam/v/{name}"] = moment
        arrays["adam/step"] = np.array([self.adam.step], dtype=np.float32)
        arrays["state/epoch"] = np.array([self.epoch], dtype=np.float32)
        arrays["state/bad_epochs"] = np.array([self.bad_epochs], dtype=np.float32)
        arrays["state/best_ndcg10"] = _pack_float64(self.best_ndcg10)
        return arrays

    def save_state(self, path: Union[str, Path]) -> None:
        checkpoint.save(path, self.state_arrays())

    def load_state(self, path: Union[str, Path]) -> None:
        """Restore parameters, optimiser moments and counters written by :meth:`save_state`."""
        arrays, _ = checkpoint.load(path)
        names = [name for name, _ in self.params.trainable_items()]
        missing = [name for name in names if name not in arrays]
        if missing or "state/epoch" not in arrays:
            raise TrainingError(f"{path} is not a training-state checkpoint (missing {missing[:3]})")
        self.params.load_arrays({name: arrays[name] for name in names}, strict=False)
        self.adam.first_moment = {n: arrays[f"adam/m/{n}"] for n in names if f"adam/m/{n}" in arrays}
        self.adam.second_moment = {n: arrays[f"adam/v/{n}"] for n in names if f"adam/v/{n}" in arrays}
        self.adam.step = int(arrays["adam/step"][0])
        self.epoch = int(arrays["state/epoch"][0])
        self.bad_epochs = int(arrays["state/bad_epochs"][0])
        self.best_ndcg10 = _unpack_float64(arrays["state/best_ndcg10"])
        best_path = self.out_dir / BEST_CHECKPOINT if self.out_dir is not None else None
        if best_path is not None and best_path.exists():
            best, _ = checkpoint.load(best_path)
            self._best_arrays = {k: v for k, v in best.items() if k in self.params}
        logger.info(f"Resumed from {path} at epoch {self.epoch} (best NDCG@10 {self.best_ndcg10:.4f})")

    # Loop

    def _append_metrics(self, record: MetricsRecord) -> None:
        if self.out_dir is None:
            return
        with (self.out_dir / METRICS_FILE).open("a", encoding="utf-8") as stream:
            stream.write(json.dumps(record.to_json_dict()) + "\n")

    def _keep_best(self, metrics: RankingMetrics) -> bool:
        if metrics.ndcg10 > self.best_ndcg10:
            self.best_ndcg10 = metrics.ndcg10
            self.bad_epochs = 0
            self._best_arrays = self.params.state_arrays()
            if self.out_dir is not None:
                save_params(self.out_dir / BEST_CHECKPOINT, self.params)
            return True
        self.bad_epochs += 1
        return False

    def fit(self, resume: bool = False) -> FitResult:
        """Train for the epoch budget with validation after every epoch.

        The best-NDCG@10 parameters are restored at the end.

        Args:
            resume: Continue from ``out_dir/last.ckpt`` when it exists
        """
        result = FitResult()
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            last = self.out_dir / LAST_CHECKPOINT
            if resume and last.exists():
                self.load_state(last)
            else:
                (self.out_dir / METRICS_FILE).write_text("", encoding="utf-8")

        batch_size = self.config.train.batch_size
        while self.epoch < self.epochs:
            epoch = self.epoch
            report = self.train_epoch(epoch)
            metrics = evaluate(self.model, self.dataset, Split.VALID, batch_size)
            record = MetricsRecord(
                epoch=epoch + 1,
                split=Split.VALID.value,
                loss_rec=report.loss_rec,
                loss_ssl=report.loss_ssl,
                loss=report.loss,
                metrics=metrics,
            )
            result.history.append(record)
            self._append_metrics(record)
            self.epoch = epoch + 1
            improved = self._keep_best(metrics)
            if improved:
                result.best_epoch = epoch + 1
            logger.info(
                f"{self.label_prefix}epoch {epoch + 1}/{self.epochs}: loss={report.loss:.4f} "
                f"rec={report.loss_rec:.4f} ssl={report.loss_ssl:.4f} "
                f"HR@10={metrics.hr10:.4f} NDCG@10={metrics.ndcg10:.4f}{' *' if improved else ''}"
            )
            if self.out_dir is not None:
                self.save_state(self.out_dir / LAST_CHECKPOINT)
            if self.bad_epochs >= self.config.train.patience:
                logger.warning(f"Early stop after {self.bad_epochs} epochs without improvement")
                result.stopped_early = True
                break

        if self._best_arrays is not None:
            self.params.load_arrays(self._best_arrays, strict=False)
        result.best_ndcg10 = self.best_ndcg10
        return result


class SRMATrainer(RecTrainer):
    """Joint trainer: ``L = L_rec + lambda * L_ssl`` over two augmented views per user.

    Each view is a data-augmented variant of the user's training prefix
    passed through the model with its own neuron masks and layer-drop subset.
    The second branch additionally receives the scaled embedding of the frozen
    complement encoder. ``L_rec`` uses a third forward on the unaugmented
    sequence, drawn from the same streams as :class:`RecTrainer`.

    Args:
        complement: Required when ``modelaug.complement`` is not ``none``
        correlation: Required when substitute or insert is enabled
    """

    def __init__(
        self,
        model: SequenceEncoder,
        dataset: SplitDataset,
        config: ExperimentConfig,
        out_dir: Optional[Union[str, Path]] = None,
        complement: Optional[ComplementEncoder] = None,
        correlation: Optional[ItemCorrelation] = None,
        label_prefix: str = "",
        epochs: Optional[int] = None,
    ) -> None:
        super().__init__(model, dataset, config, out_dir, label_prefix, epochs)
        aug = config.aug
        if aug.enabled and aug.needs_correlation and correlation is None:
            correlation = ItemCorrelation.build(
                (u.train for u in dataset.users), dataset.catalog.num_items, aug.corr_window, aug.corr_topk
            )
        self.correlation = correlation
        self.augmenter = Augmenter(aug, dataset.catalog.mask_id, correlation) if aug.enabled else None
        self.complement = complement
        if complement is not None and not complement.params.frozen:
            raise TrainingError("The complement encoder must be frozen")

    def make_batch(self, users: List[UserSequence], epoch: int, step: int) -> TrainingBatch:
        batch = super().make_batch(users, epoch, step)
        if self.config.train.lam == 0.0:
            return batch
        views: List[List[List[int]]] = [[], []]
        for branch, view in enumerate(views, start=1):
            rng = self.stream(f"data-aug/view{branch}", epoch, step)
            for user in users:
                view.append(self.augmenter(user.train, rng) if self.augmenter is not None else list(user.train))
        maxlen = self.model.maxlen
        batch.view1, _ = pad_batch(views[0], maxlen)
        batch.view2, _ = pad_batch(views[1], maxlen)
        return batch

    def view_streams(self, branch: int, epoch: int, step: int) -> ForwardStreams:
        # Both branches replay the same attention-dropout draws; only the model
        # and data augmentations separate the views.
        return ForwardStreams(
            neuron_mask=self.stream(f"neuron-mask/view{branch}", epoch, step),
            attention=self.stream("attention/views", epoch, step),
            layer_drop=self.stream(f"layer-drop/view{branch}", epoch, step),
        )

    def encode_views(self, batch: TrainingBatch, epoch: int, step: int) -> Tuple[Tensor, Tensor]:
        """``(N, d)`` embeddings of both branches; the complement joins branch 2 only."""
        if batch.view1 is None or batch.view2 is None:
            raise TrainingError("Batch carries no augmented views")
        z1 = self.model.forward(batch.view1, Mode.TRAIN, self.view_streams(1, epoch, step)).last_position()
        z2 = self.model.forward(batch.view2, Mode.TRAIN, self.view_streams(2, epoch, step)).last_position()
        if self.config.modelaug.complement_enabled:
            z2 = complement_embedding(z2, batch.view2, self.complement, self.config.modelaug.gamma)
        return z1, z2

    def compute_loss(self, batch: TrainingBatch, epoch: int, step: int) -> Tuple[Tensor, LossReport]:
        lam = self.config.train.lam
        rec = self.rec_objective(batch, epoch, step)
        if lam == 0.0:
            return joint_objective(rec, None, lam), joint_loss(rec.item(), 0.0, lam)
        z1, z2 = self.encode_views(batch, epoch, step)
        width = z1.shape[1]
        views = BatchViews(reshape(stack([z1, z2], axis=1), (2 * batch.size, width)))
        ssl = info_nce(views)
        return joint_objective(rec, ssl, lam), joint_loss(rec.item(), ssl.item(), lam)


def pretrain_complement(
    dataset: SplitDataset,
    kind: ComplementKind,
    config: ExperimentConfig,
    epochs: Optional[int] = None,
) -> ComplementEncoder:
    """Train a complement encoder on the next-item objective, then freeze it.

    Args:
        epochs: Overrides ``modelaug.complement_epochs``; 0 freezes the initial weights
    """
    encoder = build_complement_encoder(kind, config, dataset.catalog)
    budget = config.modelaug.complement_epochs if epochs is None else epochs
    if budget > 0:
        logger.info(f"Pre-training {kind.value} complement for {budget} epochs")
        trainer = RecTrainer(SRMAModel(encoder), dataset, config, label_prefix="complement/", epochs=budget)
        result = trainer.fit()
        logger.info(f"Complement best NDCG@10 {result.best_ndcg10:.4f} at epoch {result.best_epoch}")
    return ComplementEncoder(kind, encoder)

