"""Tests for RecTrainer, SRMATrainer and complement pre-training."""

import json
import logging
from pathlib import Path
from typing import Dict

import numpy as np
import pytest

from srma_rec.rec_api.exceptions import TrainingError
from srma_rec.rec_api.types import ComplementKind, Split, SplitDataset, UserSequence
from srma_rec.rec_numpy_impl.config import ExperimentConfig
from srma_rec.rec_numpy_impl.dataset import generate_synthetic, split_dataset
from srma_rec.rec_numpy_impl.evaluation import evaluate
from srma_rec.rec_numpy_impl.experiment import run_experiment
from srma_rec.rec_numpy_impl.model import build_model
from srma_rec.rec_numpy_impl.trainer import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    METRICS_FILE,
    RecTrainer,
    SRMATrainer,
    pretrain_complement,
)


def _assert_same_params(a: Dict[str, np.ndarray], b: Dict[str, np.ndarray]) -> None:
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name], err_msg=name)


class TestRecTrainer:
    """Test cases for RecTrainer."""

    def test_skips_short_users(
        self, tiny_dataset: SplitDataset, small_config: ExperimentConfig, caplog: pytest.LogCaptureFixture
    ) -> None:
        """Test users with a one-item training prefix are skipped with a warning."""
        config = small_config.with_values({"data.maxlen": "6"})
        with caplog.at_level(logging.WARNING):
            trainer = RecTrainer(build_model(config, tiny_dataset.catalog), tiny_dataset, config)

        assert [u.user for u in trainer.users] == [0, 1, 2, 4]
        assert "Skipping 1 users" in caplog.text

    def test_empty_training_split(self, tiny_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test a dataset without trainable users is rejected."""
        short = SplitDataset(tiny_dataset.catalog, [UserSequence(0, [1, 2, 3])], maxlen=6)
        config = small_config.with_values({"data.maxlen": "6"})
        with pytest.raises(TrainingError):
            RecTrainer(build_model(config, tiny_dataset.catalog), short, config)

    def test_batches_cover_users_once(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test every user appears in exactly one batch and orders differ across epochs."""
        trainer = RecTrainer(build_model(small_config, synthetic_dataset.catalog), synthetic_dataset, small_config)
        first = [u.user for batch in trainer.batches(0) for u in batch]
        second = [u.user for batch in trainer.batches(1) for u in batch]

        assert sorted(first) == sorted(u.user for u in trainer.users)
        assert first != second
        assert first == [u.user for batch in trainer.batches(0) for u in batch]

    def test_negatives_avoid_history(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test sampled negatives never hit the user's training items."""
        trainer = RecTrainer(build_model(small_config, synthetic_dataset.catalog), synthetic_dataset, small_config)
        users = trainer.batches(0)[0]
        batch = trainer.make_batch(users, 0, 0)

        assert batch.negatives.shape == (len(users), small_config.data.maxlen, small_config.data.num_negatives)
        for row, user in enumerate(users):
            assert not set(batch.negatives[row].ravel().tolist()) & set(user.train)

    def test_fit_writes_metrics_and_checkpoints(
        self, tmp_path: Path, synthetic_dataset: SplitDataset, small_config: ExperimentConfig
    ) -> None:
        """Test one epoch produces one metrics record and both checkpoints."""
        model = build_model(small_config, synthetic_dataset.catalog)
        result = RecTrainer(model, synthetic_dataset, small_config, out_dir=tmp_path, epochs=1).fit()
        lines = (tmp_path / METRICS_FILE).read_text(encoding="utf-8").splitlines()

        assert result.epochs_run == 1
        assert result.best_epoch == 1
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert record["epoch"] == 1
        assert record["split"] == "valid"
        assert (tmp_path / LAST_CHECKPOINT).exists()
        assert (tmp_path / BEST_CHECKPOINT).exists()

    def test_zero_epochs(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test an empty epoch budget leaves the parameters untouched."""
        model = build_model(small_config, synthetic_dataset.catalog)
        before = model.params.state_arrays()
        result = RecTrainer(model, synthetic_dataset, small_config, epochs=0).fit()

        assert result.epochs_run == 0
        _assert_same_params(before, model.params.state_arrays())


class TestSRMATrainer:
    """Test cases for SRMATrainer."""

    def test_lambda_zero_matches_rec_trainer(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test lambda = 0 reproduces the plain trainer bit for bit."""
        config = small_config.with_values({"train.lambda": "0"})
        rec = RecTrainer(build_model(config, synthetic_dataset.catalog), synthetic_dataset, config)
        joint = SRMATrainer(build_model(config, synthetic_dataset.catalog), synthetic_dataset, config)
        for epoch in range(2):
            a = rec.train_epoch(epoch)
            b = joint.train_epoch(epoch)
            assert a.loss == b.loss

        _assert_same_params(rec.params.state_arrays(), joint.params.state_arrays())

    def test_identical_branches_without_augmentation(
        self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig
    ) -> None:
        """Test p = 0, M = 0 and no data augmentation give identical views despite attention dropout."""
        config = small_config.with_values({"modelaug.p": "0", "modelaug.M": "0", "aug.enabled": "false"})
        assert config.encoder.attn_dropout > 0.0
        trainer = SRMATrainer(build_model(config, synthetic_dataset.catalog), synthetic_dataset, config)
        batch = trainer.make_batch(trainer.batches(0)[0], 0, 0)
        z1, z2 = trainer.encode_views(batch, 0, 0)

        np.testing.assert_array_equal(z1.values, z2.values)

    def test_views_differ_with_model_augmentation(
        self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig
    ) -> None:
        """Test neuron masking alone separates the two views."""
        config = small_config.with_values({"modelaug.p": "0.3", "aug.enabled": "false"})
        trainer = SRMATrainer(build_model(config, synthetic_dataset.catalog), synthetic_dataset, config)
        batch = trainer.make_batch(trainer.batches(0)[0], 0, 0)
        z1, z2 = trainer.encode_views(batch, 0, 0)

        assert not np.array_equal(z1.values, z2.values)

    def test_complement_changes_second_branch_only(
        self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig
    ) -> None:
        """Test enabling the complement leaves branch 1 bit-identical and moves branch 2."""
        catalog = synthetic_dataset.catalog
        plain = SRMATrainer(build_model(small_config, catalog), synthetic_dataset, small_config)
        config = small_config.with_values({"modelaug.complement": "gru", "modelaug.gamma": "0.5"})
        complement = pretrain_complement(synthetic_dataset, ComplementKind.GRU, config, epochs=0)
        complemented = SRMATrainer(build_model(config, catalog), synthetic_dataset, config, complement=complement)
        users = plain.batches(0)[0]
        a1, a2 = plain.encode_views(plain.make_batch(users, 0, 0), 0, 0)
        b1, b2 = complemented.encode_views(complemented.make_batch(users, 0, 0), 0, 0)

        np.testing.assert_array_equal(a1.values, b1.values)
        assert not np.array_equal(a2.values, b2.values)

    def test_deterministic(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test two runs from the same seed agree exactly."""
        trainers = [
            SRMATrainer(build_model(small_config, synthetic_dataset.catalog), synthetic_dataset, small_config)
            for _ in range(2)
        ]
        reports = [t.train_epoch(0) for t in trainers]

        assert reports[0] == reports[1]
        _assert_same_params(trainers[0].params.state_arrays(), trainers[1].params.state_arrays())

    def test_joint_loss_reported(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test the epoch report combines both terms with lambda."""
        trainer = SRMATrainer(build_model(small_config, synthetic_dataset.catalog), synthetic_dataset, small_config)
        report = trainer.train_epoch(0)

        assert report.loss_ssl > 0.0
        assert report.lam == small_config.train.lam
        assert report.loss == pytest.approx(report.loss_rec + report.lam * report.loss_ssl)

    def test_resume_replays_exactly(
        self, tmp_path: Path, synthetic_dataset: SplitDataset, small_config: ExperimentConfig
    ) -> None:
        """Test stopping after one epoch and resuming matches an uninterrupted run."""
        catalog = synthetic_dataset.catalog
        straight = SRMATrainer(build_model(small_config, catalog), synthetic_dataset, small_config, tmp_path / "a", epochs=2)
        straight.fit()

        out = tmp_path / "b"
        SRMATrainer(build_model(small_config, catalog), synthetic_dataset, small_config, out, epochs=1).fit()
        resumed = SRMATrainer(build_model(small_config, catalog), synthetic_dataset, small_config, out, epochs=2)
        result = resumed.fit(resume=True)

        assert result.epochs_run == 1
        assert len((out / METRICS_FILE).read_text(encoding="utf-8").splitlines()) == 2
        assert resumed.best_ndcg10 == straight.best_ndcg10
        _assert_same_params(straight.params.state_arrays(), resumed.params.state_arrays())

    def test_complement_stays_frozen(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test joint training never changes the complement's parameters."""
        config = small_config.with_values({"modelaug.complement": "gru", "modelaug.gamma": "0.1"})
        complement = pretrain_complement(synthetic_dataset, ComplementKind.GRU, config)
        before = complement.params.state_arrays()
        trainer = SRMATrainer(
            build_model(config, synthetic_dataset.catalog), synthetic_dataset, config, complement=complement, epochs=1
        )
        trainer.fit()

        assert complement.params.frozen
        _assert_same_params(before, complement.params.state_arrays())

    def test_pretrain_with_zero_epochs(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test a zero budget freezes the initial complement."""
        complement = pretrain_complement(synthetic_dataset, ComplementKind.TRANSFORMER_1_LAYER, small_config, epochs=0)

        assert complement.kind is ComplementKind.TRANSFORMER_1_LAYER
        assert complement.params.frozen


@pytest.mark.slow
class TestLearnability:
    """Training on a low-entropy Markov chain beats the untrained model."""

    def test_ndcg_improves(self) -> None:
        """Test trained NDCG@10 clearly exceeds the initial model's."""
        records = generate_synthetic(num_users=300, num_items=40, seq_len=20, concentration=0.05, seed=21)
        dataset = split_dataset(records, kcore=1, maxlen=20)
        config = ExperimentConfig().with_values({
            "data.maxlen": "20",
            "encoder.hidden": "32",
            "encoder.layers": "2",
            "train.batch_size": "64",
            "train.epochs": "15",
            "train.lr": "0.005",
            "train.seed": "3",
        })
        model = build_model(config, dataset.catalog)
        baseline = evaluate(model, dataset, Split.TEST)
        SRMATrainer(model, dataset, config).fit()
        trained = evaluate(model, dataset, Split.TEST)

        assert trained.ndcg10 > baseline.ndcg10 + 0.05


@pytest.mark.slow
class TestDeskLearnability:
    """The shipped desk config learns the synthetic chain on most seeds."""

    def test_hit_rate_on_most_seeds(self, desk_dataset: SplitDataset, desk_config: ExperimentConfig) -> None:
        """Test HR@10 reaches 0.30, three times the random baseline, on at least 4 of 5 seeds."""
        hit_rates = [
            run_experiment(desk_config.with_values({"train.seed": str(seed)}), desk_dataset).test.hr10
            for seed in (1, 2, 3, 4, 5)
        ]

        assert sum(hr >= 0.30 for hr in hit_rates) >= 4, hit_rates
