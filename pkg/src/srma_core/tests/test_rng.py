"""Tests for labelled random streams."""

import numpy as np

from srma_core.rng import RngStream


class TestRngStream:
    """Test cases for RngStream."""

    def test_same_key_replays(self) -> None:
        """Test identical (seed, label) streams produce identical draws."""
        a = RngStream(7, "data-aug")
        b = RngStream(7, "data-aug")
        np.testing.assert_array_equal(a.random(16), b.random(16))
        assert a.integers(0, 100, size=8).tolist() == b.integers(0, 100, size=8).tolist()

    def test_distinct_labels_differ(self) -> None:
        """Test distinct labels give different streams."""
        a = RngStream(7, "neuron-mask/view1").random(32)
        b = RngStream(7, "neuron-mask/view2").random(32)
        assert not np.array_equal(a, b)

    def test_distinct_seeds_differ(self) -> None:
        """Test distinct seeds give different streams."""
        assert not np.array_equal(RngStream(1, "x").random(8), RngStream(2, "x").random(8))

    def test_fork_is_deterministic(self) -> None:
        """Test forked children replay and differ from the parent."""
        parent = RngStream(3, "negatives")
        child = parent.fork("epoch0")
        assert child.label == "negatives/epoch0"
        np.testing.assert_array_equal(child.random(4), RngStream(3, "negatives/epoch0").random(4))

    def test_draw_counter(self) -> None:
        """Test the draw counter advances per call."""
        stream = RngStream(0, "count")
        stream.random(3)
        stream.integer(0, 5)
        assert stream.draws == 2

    def test_choice_without_replacement(self) -> None:
        """Test choice returns distinct positions."""
        picks = RngStream(0, "choice").choice(10, 5)
        assert len(set(picks.tolist())) == 5
