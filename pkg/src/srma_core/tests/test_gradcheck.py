"""Tests for finite-difference gradient checking."""

import numpy as np

from srma_core.gradcheck import check_ops, grad_check, grad_check_params
from srma_core.params import ParamStore
from srma_core.tensor import Tensor, matmul, mul, softmax_rows, sum_, tanh


class TestGradCheck:
    """Test cases for grad_check."""

    def test_sum_has_zero_error(self, float64: None) -> None:
        """Test fn = sum(x) gives all-ones gradients and ~zero error."""
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
        assert grad_check(sum_, x) <= 1e-8

    def test_softmax_weighted(self, float64: None) -> None:
        """Test the softmax oracle passes at 1e-4."""
        rng = np.random.default_rng(1)
        c = Tensor(rng.normal(size=(4, 6)))
        x = Tensor(rng.normal(size=(4, 6)))
        assert grad_check(lambda t: sum_(mul(softmax_rows(t), c)), x) <= 1e-4

    def test_detects_wrong_gradient(self, float64: None) -> None:
        """Test a broken backward pass is reported."""
        x = Tensor(np.array([[0.3, -0.7]]))

        def broken(t: Tensor) -> Tensor:
            out = mul(t, t)
            original = out._backward
            assert original is not None
            out._backward = lambda g: [2.0 * part for part in original(g)]  # type: ignore[misc]
            return sum_(out)

        assert grad_check(broken, x) > 0.1

    def test_params_check(self, float64: None) -> None:
        """Test checking all parameters of a small composed loss."""
        rng = np.random.default_rng(2)
        store = ParamStore()
        w1 = store.add("w1", rng.normal(size=(3, 4)))
        w2 = store.add("w2", rng.normal(size=(4, 2)))
        x = Tensor(rng.normal(size=(5, 3)))
        errors = grad_check_params(lambda: sum_(tanh(matmul(tanh(matmul(x, w1)), w2))), store)
        assert set(errors) == {"w1", "w2"}
        assert max(errors.values()) <= 1e-4


class TestOpSuite:
    """Test cases for the randomized op suite."""

    def test_suite_passes(self) -> None:
        """Test at least 100 random op cases pass at 1e-4."""
        report = check_ops(num_cases=112, seed=0)
        assert report.cases >= 100
        assert report.passed(1e-4), report.per_op
        assert len(report.per_op) >= 16
