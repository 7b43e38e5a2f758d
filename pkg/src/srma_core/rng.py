"""Labelled, seeded random streams.

Each stream is keyed by ``(seed, label)``: the label is hashed into the spawn
key of a numpy ``SeedSequence``, so distinct labels give independent streams
and the same key always replays the same draws.
"""

import hashlib
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

Shape = Union[int, Tuple[int, ...]]


def _label_key(label: str) -> Tuple[int, ...]:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class RngStream:
    """Deterministic random stream identified by a seed and a label.

    Args:
        seed: 64-bit seed shared by every stream of an experiment
        label: Purpose of the stream, e.g. ``"neuron-mask/view1"``
    """

    def __init__(self, seed: int, label: str) -> None:
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.label = label
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=_label_key(label))
        self._generator = np.random.Generator(np.random.PCG64(sequence))
        self.draws = 0

    def fork(self, suffix: Union[str, int]) -> "RngStream":
        """Derive an independent child stream ``label/suffix``."""
        return RngStream(self.seed, f"{self.label}/{suffix}")

    def random(self, shape: Shape = ()) -> npt.NDArray[np.float64]:
        """Uniform floats in [0, 1)."""
        self.draws += 1
        return self._generator.random(shape)

    def normal(self, shape: Shape, std: float = 1.0) -> npt.NDArray[np.float64]:
        self.draws += 1
        return self._generator.normal(0.0, std, shape)

    def integers(self, low: int, high: int, size: Optional[Shape] = None) -> Any:
        """Uniform integers in [low, high)."""
        self.draws += 1
        return self._generator.integers(low, high, size=size)

    def integer(self, low: int, high: int) -> int:
        """A single uniform integer in [low, high)."""
        return int(self.integers(low, high))

    def choice(self, n: int, size: int, replace: bool = False) -> npt.NDArray[np.int64]:
        self.draws += 1
        return np.asarray(self._generator.choice(n, size=size, replace=replace), dtype=np.int64)

    def permutation(self, items: Sequence[Any]) -> list[Any]:
        self.draws += 1
        order = self._generator.permutation(len(items))
        return [items[i] for i in order]

    def dirichlet(self, concentration: float, size: int, rows: int) -> npt.NDArray[np.float64]:
        """``rows`` draws from a symmetric Dirichlet over ``size`` outcomes."""
        self.draws += 1
        return self._generator.dirichlet(np.full(size, concentration), size=rows)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r}, draws={self.draws})"
