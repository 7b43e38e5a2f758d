"""Stochastic sequence augmentations for building contrastive views.

Every operator takes the unpadded item list and an :class:`RngStream` and
returns a new list; the input is never modified.
"""

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from srma_core import RngStream

from ..rec_api.exceptions import AugmentationError
from ..rec_api.types import AugmentOp
from .config import AugmentConfig

logger = logging.getLogger(__name__)

CANONICAL_ORDER: Tuple[AugmentOp, ...] = tuple(AugmentOp)


def _require_items(s: Sequence[int], op: str) -> None:
    if len(s) < 1:
        raise AugmentationError(f"{op} needs a non-empty sequence")


def crop(s: Sequence[int], eta: float, rng: RngStream) -> List[int]:
    """Contiguous window of ``max(1, ceil(eta * |s|))`` items at a uniform start."""
    _require_items(s, "crop")
    if not 0.0 < eta <= 1.0:
        raise AugmentationError("crop ratio must lie in (0, 1]")
    length = max(1, math.ceil(eta * len(s)))
    start = rng.integer(0, len(s) - length + 1)
    return list(s[start:start + length])


def mask(s: Sequence[int], ratio: float, mask_id: int, rng: RngStream) -> List[int]:
    """Replace ``floor(ratio * |s|)`` distinct uniform positions with ``mask_id``."""
    _require_items(s, "mask")
    out = list(s)
    count = math.floor(ratio * len(s))
    if count > 0:
        for position in rng.choice(len(s), count):
            out[int(position)] = mask_id
    return out


def reorder(s: Sequence[int], ratio: float, rng: RngStream) -> List[int]:
    """Shuffle a contiguous segment of ``floor(ratio * |s|)`` items in place."""
    _require_items(s, "reorder")
    out = list(s)
    length = math.floor(ratio * len(s))
    if length <= 1:
        return out
    start = rng.integer(0, len(s) - length + 1)
    out[start:start + length] = rng.permutation(out[start:start + length])
    return out


@dataclass
class ItemCorrelation:
    """Windowed co-occurrence correlates of every item.

    ``ranked[item]`` lists ``(correlate, score)`` by descending score, ties by
    ascending id. Scores are co-occurrence counts normalised per item.
    """
    num_items: int
    ranked: Dict[int, List[Tuple[int, float]]] = field(default_factory=dict)
    fallbacks: int = 0

    @classmethod
    def build(cls, sequences: Iterable[Sequence[int]], num_items: int, window: int = 3, topk: int = 5) -> "ItemCorrelation":
        """Count pairs at distance ``1..window`` within each training sequence."""
        counts: Dict[int, Counter[int]] = defaultdict(Counter)
        for s in sequences:
            for i, left in enumerate(s):
                for right in s[i + 1:i + 1 + window]:
                    if left != right:
                        counts[left][right] += 1
                        counts[right][left] += 1
        ranked: Dict[int, List[Tuple[int, float]]] = {}
        for item, row in counts.items():
            total = float(sum(row.values()))
            ordered = sorted(row.items(), key=lambda pair: (-pair[1], pair[0]))[:topk]
            ranked[item] = [(other, count / total) for other, count in ordered]
        logger.debug(f"Item correlation built for {len(ranked)}/{num_items} items")
        return cls(num_items=num_items, ranked=ranked)

    def correlates(self, item: int) -> List[int]:
        return [other for other, _ in self.ranked.get(item, [])]

    def draw(self, item: int, rng: RngStream) -> int:
        """A uniform top-k correlate of ``item``, or a uniform real item if it has none."""
        candidates = self.correlates(item)
        if not candidates:
            self.fallbacks += 1
            return rng.integer(1, self.num_items + 1)
        return candidates[rng.integer(0, len(candidates))]


def substitute(s: Sequence[int], ratio: float, corr: ItemCorrelation, rng: RngStream) -> List[int]:
    """Replace ``floor(ratio * |s|)`` positions with a correlate of the replaced item."""
    _require_items(s, "substitute")
    out = list(s)
    count = math.floor(ratio * len(s))
    if count > 0:
        for position in rng.choice(len(s), count):
            out[int(position)] = corr.draw(out[int(position)], rng)
    return out


def insert(s: Sequence[int], ratio: float, corr: ItemCorrelation, rng: RngStream) -> List[int]:
    """After each of ``floor(ratio * |s|)`` chosen positions insert a correlate of its item."""
    _require_items(s, "insert")
    count = math.floor(ratio * len(s))
    if count <= 0:
        return list(s)
    chosen = {int(p) for p in rng.choice(len(s), count)}
    out: List[int] = []
    for position, item in enumerate(s):
        out.append(item)
        if position in chosen:
            out.append(corr.draw(item, rng))
    return out


class Augmenter:
    """Applies one uniformly selected enabled operator per call.

    Args:
        config: Ratios and enabled operators
        mask_id: Token written by the mask operator
        correlation: Required when substitute or insert is enabled
    """

    def __init__(self, config: AugmentConfig, mask_id: int, correlation: Optional[ItemCorrelation] = None) -> None:
        self.config = config
        self.mask_id = mask_id
        self.correlation = correlation
        self.ops = [op for op in CANONICAL_ORDER if op in config.ops]
        if not self.ops:
            raise AugmentationError("At least one augmentation must be enabled")
        if correlation is None and config.needs_correlation:
            raise AugmentationError("substitute/insert need an item correlation table")

    def apply(self, op: AugmentOp, s: Sequence[int], rng: RngStream) -> List[int]:
        cfg = self.config
        if op is AugmentOp.CROP:
            return crop(s, cfg.crop_ratio, rng)
        if op is AugmentOp.MASK:
            return mask(s, cfg.mask_ratio, self.mask_id, rng)
        if op is AugmentOp.REORDER:
            return reorder(s, cfg.reorder_ratio, rng)
        assert self.correlation is not None
        if op is AugmentOp.SUBSTITUTE:
            return substitute(s, cfg.substitute_ratio, self.correlation, rng)
        return insert(s, cfg.insert_ratio, self.correlation, rng)

    def choose(self, rng: RngStream) -> AugmentOp:
        return self.ops[rng.integer(0, len(self.ops))]

    def __call__(self, s: Sequence[int], rng: RngStream) -> List[int]:
        return self.apply(self.choose(rng), s, rng)


def random_augment(
    s: Sequence[int],
    config: AugmentConfig,
    rng: RngStream,
    mask_id: int,
    correlation: Optional[ItemCorrelation] = None,
) -> List[int]:
    """Apply one operator chosen uniformly among ``config.ops``."""
    return Augmenter(config, mask_id, correlation)(s, rng)
