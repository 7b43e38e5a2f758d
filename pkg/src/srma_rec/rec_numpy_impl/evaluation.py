"""Full-catalog ranking evaluation: HR@k and NDCG@k for k in {5, 10, 20}."""

import logging
import math
from typing import Iterable, List, Sequence

import numpy as np
import numpy.typing as npt

from srma_core import Tensor, no_grad

from ..rec_api.exceptions import EvaluationError
from ..rec_api.interfaces import SequenceEncoder
from ..rec_api.types import Mode, RankingMetrics, RankResult, Split, SplitDataset
from .dataset import pad_batch

logger = logging.getLogger(__name__)

CUTOFFS = (5, 10, 20)


def rank_scores(
    scores: npt.NDArray[np.floating],
    target: int,
    exclusions: Iterable[int],
    num_items: int,
) -> int:
    """Pessimistic 1-based rank of ``target`` given scores over the whole item table.

    Only real items ``1..num_items`` not in ``exclusions`` compete; an item tied
    with the target is counted as ranked above it.
    """
    eligible = np.zeros(scores.shape[0], dtype=bool)
    eligible[1:num_items + 1] = True
    blocked = [i for i in exclusions if 1 <= i <= num_items]
    if blocked:
        eligible[blocked] = False
    eligible[target] = True
    return int(np.count_nonzero(scores[eligible] >= scores[target]))


def rank_target(
    z: npt.NDArray[np.floating],
    item_table: npt.NDArray[np.floating],
    target: int,
    exclusions: Iterable[int],
    user: int = -1,
) -> RankResult:
    """Rank ``target`` by dot product of ``z`` with every real-item embedding.

    Args:
        z: ``(d,)`` user embedding
        item_table: ``(|V| + 2, d)`` item table including pad and mask rows
        target: Held-out item id
        exclusions: Already-interacted items removed from the candidates

    Raises:
        EvaluationError: If ``target`` is not a real item or is excluded
    """
    num_items = item_table.shape[0] - 2
    excluded = set(exclusions)
    if not 1 <= target <= num_items:
        raise EvaluationError(f"Target {target} is not a real item id in [1, {num_items}]")
    if target in excluded:
        raise EvaluationError(f"Target {target} is among the exclusions")
    scores = np.asarray(item_table) @ np.asarray(z)
    return RankResult(user=user, target=target, rank=rank_scores(scores, target, excluded, num_items))


def _check(ranks: Sequence[int], k: int) -> npt.NDArray[np.int64]:
    if k < 1:
        raise EvaluationError(f"k must be at least 1, got {k}")
    if len(ranks) == 0:
        raise EvaluationError("No ranks to aggregate")
    return np.asarray(ranks, dtype=np.int64)


def hr_at_k(ranks: Sequence[int], k: int) -> float:
    """Fraction of users whose target ranks within the top ``k``."""
    array = _check(ranks, k)
    return float(np.mean(array <= k))


def ndcg_at_k(ranks: Sequence[int], k: int) -> float:
    """Mean of ``1 / log2(rank + 1)`` over users, counting 0 beyond ``k``."""
    array = _check(ranks, k)
    gains = np.where(array <= k, 1.0 / np.log2(array + 1.0), 0.0)
    return float(np.mean(gains))


def summarize(ranks: Sequence[int]) -> RankingMetrics:
    hr = [hr_at_k(ranks, k) for k in CUTOFFS]
    ndcg = [ndcg_at_k(ranks, k) for k in CUTOFFS]
    return RankingMetrics(
        hr5=hr[0], hr10=hr[1], hr20=hr[2],
        ndcg5=ndcg[0], ndcg10=ndcg[1], ndcg20=ndcg[2],
        users=len(ranks),
    )


def rank_split(model: SequenceEncoder, dataset: SplitDataset, split: Split, batch_size: int = 256) -> List[RankResult]:
    """Rank every user's ``split`` target with one eval-mode forward per batch.

    Inference runs the encoder and the full FFN stack; the complement encoder
    never takes part.
    """
    if batch_size < 1:
        raise EvaluationError("batch_size must be at least 1")
    num_items = dataset.catalog.num_items
    results: List[RankResult] = []
    with no_grad():
        table = model.item_table.values
        for start in range(0, len(dataset.users), batch_size):
            users = dataset.users[start:start + batch_size]
            contexts = [u.context(split) for u in users]
            ids, _ = pad_batch(contexts, model.maxlen)
            z: Tensor = model.forward(ids, Mode.EVAL).last_position()
            scores = z.values @ table.T
            for row, user in enumerate(users):
                target = user.target(split)
                exclusions = set(contexts[row])
                exclusions.discard(target)
                rank = rank_scores(scores[row], target, exclusions, num_items)
                results.append(RankResult(user=user.user, target=target, rank=rank))
    return results


def evaluate(model: SequenceEncoder, dataset: SplitDataset, split: Split, batch_size: int = 256) -> RankingMetrics:
    """HR/NDCG at 5, 10 and 20 over all users of ``dataset`` on ``split``.

    Raises:
        EvaluationError: If the dataset has no users
    """
    if not dataset.users:
        raise EvaluationError("Cannot evaluate an empty dataset")
    ranks = [r.rank for r in rank_split(model, dataset, split, batch_size)]
    metrics = summarize(ranks)
    logger.debug(
        f"{split.value}: HR@10={metrics.hr10:.4f} NDCG@10={metrics.ndcg10:.4f} over {metrics.users} users"
    )
    return metrics


def ndcg_contribution(rank: int, k: int) -> float:
    """Single-user NDCG@k gain; the ideal DCG is 1."""
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0
