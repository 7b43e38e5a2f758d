"""Tests for full-catalog ranking and the HR/NDCG metrics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srma_rec.rec_api.exceptions import EvaluationError
from srma_rec.rec_api.types import Split, SplitDataset
from srma_rec.rec_numpy_impl.config import ExperimentConfig
from srma_rec.rec_numpy_impl.evaluation import (
    evaluate,
    hr_at_k,
    ndcg_at_k,
    ndcg_contribution,
    rank_split,
    rank_target,
    summarize,
)
from srma_rec.rec_numpy_impl.model import build_model


def _brute_force_rank(z: np.ndarray, table: np.ndarray, target: int, exclusions: set) -> int:
    num_items = table.shape[0] - 2
    scores = table @ z
    rank = 1
    for item in range(1, num_items + 1):
        if item == target or item in exclusions:
            continue
        if scores[item] >= scores[target]:
            rank += 1
    return rank


class TestRankTarget:
    """Test cases for rank_target."""

    def test_best_item_ranks_first(self) -> None:
        """Test the highest-scoring target gets rank 1."""
        table = np.zeros((7, 2))
        table[1:6] = [[0.1, 0], [0.2, 0], [0.9, 0], [0.3, 0], [0.4, 0]]
        table[6] = [5.0, 0]
        result = rank_target(np.array([1.0, 0.0]), table, 3, exclusions=[])

        assert result.rank == 1

    def test_ties_are_pessimistic(self) -> None:
        """Test an all-equal scoring ranks the target last among eligible items."""
        table = np.zeros((12, 3))
        assert rank_target(np.ones(3), table, 4, exclusions=[]).rank == 10
        assert rank_target(np.ones(3), table, 4, exclusions=[1, 2, 3]).rank == 7

    def test_pad_and_mask_rows_never_compete(self) -> None:
        """Test rows 0 and |V| + 1 are not candidates."""
        table = np.zeros((5, 1))
        table[0] = table[4] = 100.0
        table[1:4, 0] = [1.0, 2.0, 3.0]
        assert rank_target(np.ones(1), table, 3, exclusions=[]).rank == 1

    def test_invalid_targets(self) -> None:
        """Test out-of-range and excluded targets are rejected."""
        table = np.zeros((6, 2))
        with pytest.raises(EvaluationError):
            rank_target(np.ones(2), table, 0, exclusions=[])
        with pytest.raises(EvaluationError):
            rank_target(np.ones(2), table, 5, exclusions=[])
        with pytest.raises(EvaluationError):
            rank_target(np.ones(2), table, 2, exclusions=[2])

    def test_positive_affine_invariance(self) -> None:
        """Test scaling and shifting every score leaves the rank unchanged."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            num_items = int(rng.integers(2, 25))
            table = rng.integers(-3, 4, size=(num_items + 2, 2)).astype(np.float64)
            z = rng.integers(-2, 3, size=2).astype(np.float64)
            target = int(rng.integers(1, num_items + 1))
            scale, shift = float(rng.choice([0.5, 2.0, 3.0])), float(rng.integers(-5, 6))
            shifted_table = np.hstack([scale * table, np.ones((num_items + 2, 1))])
            shifted_z = np.append(z, shift)

            assert rank_target(shifted_z, shifted_table, target, []).rank == rank_target(z, table, target, []).rank

    def test_matches_brute_force(self) -> None:
        """Test against a direct count over 200 random instances."""
        rng = np.random.default_rng(0)
        for _ in range(200):
            num_items = int(rng.integers(2, 30))
            table = np.round(rng.normal(size=(num_items + 2, 3)), 1)
            z = np.round(rng.normal(size=3), 1)
            target = int(rng.integers(1, num_items + 1))
            candidates = [i for i in range(1, num_items + 1) if i != target]
            exclusions = set(rng.choice(candidates, size=int(rng.integers(0, len(candidates) + 1)), replace=False).tolist())

            expected = _brute_force_rank(z, table, target, exclusions)
            assert rank_target(z, table, target, exclusions).rank == expected


class TestMetrics:
    """Test cases for hr_at_k, ndcg_at_k and summarize."""

    RANKS = [1, 3, 11, 25]

    def test_hit_rate(self) -> None:
        """Test HR@k counts ranks within the cutoff."""
        assert hr_at_k(self.RANKS, 5) == 0.5
        assert hr_at_k(self.RANKS, 10) == 0.5
        assert hr_at_k(self.RANKS, 20) == 0.75

    def test_ndcg(self) -> None:
        """Test NDCG@k with a single relevant item."""
        assert ndcg_at_k(self.RANKS, 10) == pytest.approx((1.0 + 0.5) / 4)
        assert ndcg_at_k(self.RANKS, 20) == pytest.approx((1.0 + 0.5 + 1.0 / math.log2(12)) / 4)
        assert ndcg_contribution(3, 5) == pytest.approx(0.5)
        assert ndcg_contribution(6, 5) == 0.0

    def test_summarize(self) -> None:
        """Test all six values and the user count."""
        metrics = summarize(self.RANKS)

        assert metrics.users == 4
        assert metrics.row()[:3] == (0.5, 0.5, 0.75)
        assert metrics.ndcg5 == pytest.approx(0.375)

    def test_bad_arguments(self) -> None:
        """Test k < 1 and empty rank lists are rejected."""
        with pytest.raises(EvaluationError):
            hr_at_k([1], 0)
        with pytest.raises(EvaluationError):
            ndcg_at_k([], 10)

    @settings(max_examples=100, deadline=None)
    @given(ranks=st.lists(st.integers(min_value=1, max_value=60), min_size=1, max_size=50))
    def test_monotone_in_k(self, ranks: list[int]) -> None:
        """Test HR@k and NDCG@k never decrease with k and NDCG@k never exceeds HR@k."""
        previous_hr = previous_ndcg = 0.0
        for k in range(1, 41):
            hr, ndcg = hr_at_k(ranks, k), ndcg_at_k(ranks, k)

            assert hr >= previous_hr
            assert ndcg >= previous_ndcg
            assert ndcg <= hr <= 1.0
            previous_hr, previous_ndcg = hr, ndcg


class TestEvaluate:
    """Test cases for evaluate and rank_split."""

    def test_deterministic_and_bounded(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test two evaluations agree and metrics stay in [0, 1]."""
        model = build_model(small_config, synthetic_dataset.catalog)
        a = evaluate(model, synthetic_dataset, Split.VALID)
        b = evaluate(model, synthetic_dataset, Split.VALID)

        assert a == b
        assert a.users == len(synthetic_dataset.users)
        assert all(0.0 <= value <= 1.0 for value in a.row())
        assert a.hr5 <= a.hr10 <= a.hr20

    def test_ranks_in_range(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test every rank lies in 1..|V|."""
        model = build_model(small_config, synthetic_dataset.catalog)
        results = rank_split(model, synthetic_dataset, Split.TEST)

        assert len(results) == len(synthetic_dataset.users)
        assert all(1 <= r.rank <= synthetic_dataset.catalog.num_items for r in results)

    def test_empty_dataset(self, synthetic_dataset: SplitDataset, small_config: ExperimentConfig) -> None:
        """Test evaluating no users is an error."""
        model = build_model(small_config, synthetic_dataset.catalog)
        empty = SplitDataset(synthetic_dataset.catalog, [], synthetic_dataset.maxlen)
        with pytest.raises(EvaluationError):
            evaluate(model, empty, Split.TEST)
