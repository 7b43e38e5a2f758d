"""Tests for the next-item loss, InfoNCE and the joint objective."""

import math

import numpy as np
import pytest

from srma_core import Tensor, precision, reshape
from srma_rec.rec_api.exceptions import LossError
from srma_rec.rec_api.types import BatchViews, HiddenStates
from srma_rec.rec_numpy_impl.losses import info_nce, joint_loss, joint_objective, rec_loss


def _brute_force_info_nce(v: np.ndarray) -> float:
    n = v.shape[0]
    terms = []
    for a in range(n):
        others = [float(v[a] @ v[m]) for m in range(n) if m != a]
        terms.append(math.log(sum(math.exp(s) for s in others)) - float(v[a] @ v[a ^ 1]))
    return sum(terms) / n


class TestInfoNCE:
    """Test cases for info_nce."""

    def test_single_pair_is_zero(self) -> None:
        """Test one sequence has only its positive in the denominator."""
        views = BatchViews(Tensor(np.random.default_rng(0).normal(size=(2, 5))))
        assert info_nce(views).item() == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_equal_similarities(self, n: int) -> None:
        """Test identical similarities give ln(2N - 1)."""
        views = BatchViews(Tensor(np.zeros((2 * n, 4))))
        assert info_nce(views).item() == pytest.approx(math.log(2 * n - 1), rel=1e-6)

    def test_matches_brute_force(self) -> None:
        """Test against a direct double loop in 64-bit."""
        values = np.random.default_rng(1).normal(size=(4, 3))
        with precision("float64"):
            loss = info_nce(BatchViews(Tensor(values))).item()
        assert loss == pytest.approx(_brute_force_info_nce(values), rel=1e-12)

    def test_view_swap_invariance(self) -> None:
        """Test swapping the two views of a sequence leaves the loss unchanged."""
        values = np.random.default_rng(2).normal(size=(6, 4))
        swapped = values[[1, 0, 2, 3, 5, 4]]
        with precision("float64"):
            a = info_nce(BatchViews(Tensor(values))).item()
            b = info_nce(BatchViews(Tensor(swapped))).item()
        assert a == pytest.approx(b, rel=1e-12)

    def test_decreases_with_positive_similarity(self) -> None:
        """Test raising one positive pair's similarity, all others fixed, lowers the loss."""
        n, width = 3, 7
        shared = np.zeros(width)
        shared[-1] = 1.0
        losses = []
        for strength in (0.0, 0.5, 1.0, 2.0):
            values = np.eye(2 * n, width)
            values[0] += strength * shared
            values[1] += strength * shared
            with precision("float64"):
                losses.append(info_nce(BatchViews(Tensor(values))).item())

        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_odd_rows_rejected(self) -> None:
        """Test views must come in pairs."""
        with pytest.raises(LossError):
            BatchViews(Tensor(np.zeros((3, 4))))


class TestRecLoss:
    """Test cases for rec_loss."""

    def test_zero_logits(self) -> None:
        """Test all-zero logits with one negative give 2 ln 2."""
        hidden = HiddenStates(Tensor(np.zeros((2, 3, 4))), np.array([3, 3], dtype=np.int64))
        table = Tensor(np.random.default_rng(0).normal(size=(7, 4)))
        targets = np.array([[1, 2, 3], [2, 3, 4]], dtype=np.int64)
        negatives = np.full((2, 3, 1), 5, dtype=np.int64)

        assert rec_loss(hidden, targets, negatives, table).item() == pytest.approx(2 * math.log(2), rel=1e-6)

    def test_pad_positions_ignored(self) -> None:
        """Test states at pad positions do not affect the loss."""
        rng = np.random.default_rng(3)
        states = rng.normal(size=(1, 4, 4))
        table_values = rng.normal(size=(7, 4))
        targets = np.array([[0, 0, 2, 3]], dtype=np.int64)
        negatives = np.array([[[4], [4], [5], [1]]], dtype=np.int64)
        lengths = np.array([2], dtype=np.int64)
        noisy = states.copy()
        noisy[0, :2] = rng.normal(size=(2, 4)) * 100
        with precision("float64"):
            table = Tensor(table_values)
            a = rec_loss(HiddenStates(Tensor(states), lengths), targets, negatives, table).item()
            b = rec_loss(HiddenStates(Tensor(noisy), lengths), targets, negatives, table).item()
        assert a == b

    def test_all_padded(self) -> None:
        """Test a batch without real positions is rejected."""
        hidden = HiddenStates(Tensor(np.zeros((1, 2, 4))), np.array([0], dtype=np.int64))
        with pytest.raises(LossError):
            rec_loss(hidden, np.zeros((1, 2), dtype=np.int64), np.ones((1, 2, 1), dtype=np.int64), Tensor(np.ones((4, 4))))

    def test_shape_mismatch(self) -> None:
        """Test mismatched targets are rejected."""
        hidden = HiddenStates(Tensor(np.zeros((1, 2, 4))), np.array([2], dtype=np.int64))
        with pytest.raises(LossError):
            rec_loss(hidden, np.ones((1, 3), dtype=np.int64), np.ones((1, 2, 1), dtype=np.int64), Tensor(np.ones((4, 4))))


class TestJointObjective:
    """Test cases for joint_objective and joint_loss."""

    def test_report(self) -> None:
        """Test L = rec + lambda * ssl."""
        report = joint_loss(1.5, 2.0, 0.25)

        assert report.loss == pytest.approx(2.0)
        assert report.lam == 0.25

    def test_negative_lambda(self) -> None:
        """Test a negative lambda is rejected."""
        with pytest.raises(LossError):
            joint_loss(1.0, 1.0, -0.5)
        with pytest.raises(LossError):
            joint_objective(Tensor(1.0), Tensor(1.0), -0.5)

    def test_non_finite(self) -> None:
        """Test non-finite components are rejected."""
        with pytest.raises(LossError):
            joint_loss(float("nan"), 1.0, 0.1)

    def test_lambda_zero_returns_rec(self) -> None:
        """Test lambda = 0 without a contrastive term is the next-item loss itself."""
        rec = Tensor(3.0)
        assert joint_objective(rec, None, 0.0) is rec
        with pytest.raises(LossError):
            joint_objective(rec, None, 0.1)

    def test_gradient_additivity(self) -> None:
        """Test the joint gradient equals rec plus lambda times ssl gradients."""
        values = np.random.default_rng(4).normal(size=(4, 3))
        table = np.random.default_rng(5).normal(size=(6, 3))
        targets = np.array([[1, 2], [3, 4]], dtype=np.int64)
        negatives = np.array([[[5], [1]], [[2], [5]]], dtype=np.int64)
        lengths = np.array([2, 2], dtype=np.int64)
        lam = 0.3

        def grads(which: str) -> np.ndarray:
            x = Tensor(values, requires_grad=True)
            rec = rec_loss(HiddenStates(reshape(x, (2, 2, 3)), lengths), targets, negatives, Tensor(table))
            ssl = info_nce(BatchViews(x))
            loss = {"rec": rec, "ssl": ssl, "joint": joint_objective(rec, ssl, lam)}[which]
            loss.backward()
            assert x.grad is not None
            return x.grad

        with precision("float64"):
            joint = grads("joint")
            expected = grads("rec") + lam * grads("ssl")
        np.testing.assert_allclose(joint, expected, rtol=1e-10, atol=1e-12)
