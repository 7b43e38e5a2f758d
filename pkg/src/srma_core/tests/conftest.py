"""Shared test fixtures for srma_core tests."""

from typing import Generator

import pytest

from srma_core.rng import RngStream
from srma_core.tensor import precision


@pytest.fixture
def float64() -> Generator[None, None, None]:
    """Run the test with 64-bit tensors."""
    with precision("float64"):
        yield


@pytest.fixture
def rng() -> RngStream:
    """A pinned random stream."""
    return RngStream(1234, "tests")
