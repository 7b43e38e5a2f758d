"""Shared test fixtures for rec_numpy_impl tests."""

from pathlib import Path
from typing import List

import pytest

from srma_core import RngStream
from srma_rec.rec_api.types import Catalog, SplitDataset, UserSequence
from srma_rec.rec_numpy_impl.config import ExperimentConfig
from srma_rec.rec_numpy_impl.dataset import generate_synthetic, split_dataset

DESK_CONFIG = Path(__file__).resolve().parents[4] / "configs" / "desk.conf"


@pytest.fixture
def rng() -> RngStream:
    """A pinned random stream."""
    return RngStream(7, "tests")


@pytest.fixture
def tiny_dataset() -> SplitDataset:
    """Five hand-written users over a six-item catalog."""
    catalog = Catalog(
        user_index={f"u{i}": i for i in range(5)},
        item_index={f"i{j}": j for j in range(1, 7)},
    )
    sequences: List[List[int]] = [
        [1, 2, 3, 4, 5],
        [2, 3, 4, 5, 6],
        [1, 3, 5, 2, 4, 6],
        [6, 5, 4],
        [3, 4, 5, 6, 1, 2],
    ]
    users = [UserSequence(user, items) for user, items in enumerate(sequences)]
    return SplitDataset(catalog=catalog, users=users, maxlen=6)


@pytest.fixture
def synthetic_dataset() -> SplitDataset:
    """Forty Markov-chain users over at most twelve items."""
    interactions = generate_synthetic(num_users=40, num_items=12, seq_len=8, concentration=0.1, seed=3)
    return split_dataset(interactions, kcore=1, maxlen=8)


@pytest.fixture
def small_config() -> ExperimentConfig:
    """A fast configuration sized for the synthetic fixture."""
    return ExperimentConfig().with_values({
        "data.maxlen": "8",
        "encoder.hidden": "8",
        "encoder.heads": "2",
        "encoder.layers": "1",
        "encoder.attn_dropout": "0.1",
        "modelaug.p": "0.1",
        "modelaug.K": "2",
        "modelaug.M": "1",
        "train.batch_size": "16",
        "train.epochs": "2",
        "train.lr": "0.01",
        "train.seed": "11",
        "modelaug.complement_epochs": "1",
    })


@pytest.fixture(scope="module")
def desk_config() -> ExperimentConfig:
    """The desk-scale settings shipped in configs/desk.conf."""
    return ExperimentConfig.load(DESK_CONFIG)


@pytest.fixture(scope="module")
def desk_dataset(desk_config: ExperimentConfig) -> SplitDataset:
    """The synthetic Markov-chain dataset described by the desk config."""
    synth = desk_config.synth
    interactions = generate_synthetic(synth.users, synth.items, synth.length, synth.concentration, synth.seed)
    return split_dataset(interactions, desk_config.data.kcore, desk_config.data.maxlen)
