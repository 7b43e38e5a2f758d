"""Interaction ingestion, k-core filtering, leave-one-out splits and synthetic data."""

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from srma_core import RngStream

from ..rec_api.exceptions import DatasetError, NoEligibleItemsError, ParseError
from ..rec_api.types import PAD_ID, Catalog, Interaction, SplitDataset, UserSequence

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SEQUENCES_FILE = "sequences.tsv"
CATALOG_FILE = "catalog.json"


def parse_interactions(source: Union[BinaryIO, Iterable[bytes]]) -> List[Interaction]:
    """Parse ``user<TAB>item<TAB>timestamp`` records from a UTF-8 byte stream.

    Lines starting with ``#`` and blank lines are skipped; record order is kept.

    Raises:
        ParseError: With the 1-based line number of the first malformed record
    """
    interactions: List[Interaction] = []
    for number, raw in enumerate(source, start=1):
        try:
            line = raw.decode("utf-8").rstrip("\r\n")
        except UnicodeDecodeError as e:
            raise ParseError(f"invalid UTF-8: {e}", line=number) from e
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", line=number)
        user_id, item_id, stamp = fields
        if not user_id or not item_id:
            raise ParseError("empty user or item id", line=number)
        try:
            timestamp = int(stamp)
        except ValueError as e:
            raise ParseError(f"timestamp is not an integer: {stamp!r}", line=number) from e
        interactions.append(Interaction(user_id, item_id, timestamp))
    return interactions


def read_interactions(path: PathLike) -> List[Interaction]:
    source = Path(path)
    try:
        with source.open("rb") as stream:
            return parse_interactions(stream)
    except OSError as e:
        raise DatasetError(f"Cannot read {source}: {e}") from e


def write_interactions(path: PathLike, interactions: Iterable[Interaction]) -> int:
    """Write interactions in the TSV format read by :func:`parse_interactions`."""
    target = Path(path)
    count = 0
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="\n") as stream:
            stream.write("# user\titem\ttimestamp\n")
            for record in interactions:
                stream.write(f"{record.user_id}\t{record.item_id}\t{record.timestamp}\n")
                count += 1
    except OSError as e:
        logger.error(f"Failed to write {target}: {e}")
        raise DatasetError(f"Cannot write {target}: {e}") from e
    return count


def k_core_filter(interactions: Sequence[Interaction], k: int) -> List[Interaction]:
    """Drop users and items with fewer than ``k`` interactions until nothing changes.

    The surviving set is the unique maximal subset in which every user and
    every item has at least ``k`` interactions; input order is preserved.
    """
    if k < 1:
        raise DatasetError("k must be at least 1")
    kept = list(interactions)
    rounds = 0
    while True:
        rounds += 1
        user_counts = Counter(r.user_id for r in kept)
        item_counts = Counter(r.item_id for r in kept)
        survivors = [r for r in kept if user_counts[r.user_id] >= k and item_counts[r.item_id] >= k]
        if len(survivors) == len(kept):
            break
        kept = survivors
    logger.debug(f"{k}-core filter kept {len(kept)}/{len(interactions)} interactions after {rounds} rounds")
    return kept


def build_catalog(interactions: Iterable[Interaction]) -> Catalog:
    """Index users from 0 and items from 1, both by first appearance."""
    catalog = Catalog()
    for record in interactions:
        catalog.user_index.setdefault(record.user_id, len(catalog.user_index))
        catalog.item_index.setdefault(record.item_id, len(catalog.item_index) + 1)
    return catalog


def build_sequences(interactions: Iterable[Interaction], catalog: Catalog) -> List[List[int]]:
    """Per-user internal item ids in timestamp order; ties keep file order."""
    timed: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for record in interactions:
        timed[catalog.user_index[record.user_id]].append((record.timestamp, catalog.item_index[record.item_id]))
    sequences: List[List[int]] = []
    for user in range(catalog.num_users):
        ordered = sorted(timed[user], key=lambda pair: pair[0])
        sequences.append([item for _, item in ordered])
    return sequences


def leave_one_out(sequence: Sequence[int]) -> Tuple[List[int], int, int]:
    """Split into (train prefix, validation target, test target).

    Raises:
        DatasetError: If the sequence has fewer than 3 items
    """
    if len(sequence) < 3:
        raise DatasetError(f"leave-one-out needs at least 3 items, got {len(sequence)}")
    return list(sequence[:-2]), sequence[-2], sequence[-1]


def split_dataset(interactions: Sequence[Interaction], kcore: int, maxlen: int) -> SplitDataset:
    """k-core filter, re-index and split every user's sequence.

    Users with fewer than 3 interactions cannot be split; dropping them can
    push items below ``kcore``, so filtering repeats until both hold.
    """
    kept = k_core_filter(interactions, kcore)
    while True:
        counts = Counter(r.user_id for r in kept)
        short = {user for user, count in counts.items() if count < 3}
        if not short:
            break
        logger.warning(f"Dropped {len(short)} users with fewer than 3 interactions")
        kept = k_core_filter([r for r in kept if r.user_id not in short], kcore)
    catalog = build_catalog(kept)
    sequences = build_sequences(kept, catalog)
    users = [UserSequence(user, items) for user, items in enumerate(sequences)]
    logger.info(f"Prepared {catalog.num_users} users, {catalog.num_items} items, {len(kept)} interactions")
    return SplitDataset(catalog=catalog, users=users, maxlen=maxlen)


def training_pairs(train: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Inputs and next-item targets of a train prefix: ``train[:-1]`` and ``train[1:]``."""
    return list(train[:-1]), list(train[1:])


def pad_truncate(sequence: Sequence[int], maxlen: int, pad_id: int = PAD_ID) -> Tuple[npt.NDArray[np.int64], int]:
    """Keep the newest ``maxlen`` items and left-pad.

    Returns:
        Tuple of the ``(maxlen,)`` id array and the true length
    """
    if maxlen < 1:
        raise DatasetError("maxlen must be at least 1")
    recent = list(sequence)[-maxlen:]
    ids = np.full(maxlen, pad_id, dtype=np.int64)
    if recent:
        ids[maxlen - len(recent):] = recent
    return ids, len(recent)


def pad_batch(sequences: Sequence[Sequence[int]], maxlen: int) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Stack :func:`pad_truncate` over a batch."""
    ids = np.zeros((len(sequences), maxlen), dtype=np.int64)
    lengths = np.zeros(len(sequences), dtype=np.int64)
    for row, sequence in enumerate(sequences):
        ids[row], lengths[row] = pad_truncate(sequence, maxlen)
    return ids, lengths


def sample_negatives(rng: RngStream, excluded: Iterable[int], num_items: int, n: int) -> npt.NDArray[np.int64]:
    """Draw ``n`` items uniformly from ``1..num_items`` minus ``excluded``.

    Raises:
        NoEligibleItemsError: If every real item is excluded
    """
    blocked = np.fromiter({i for i in excluded if 1 <= i <= num_items}, dtype=np.int64)
    eligible_count = num_items - blocked.size
    if eligible_count <= 0:
        raise NoEligibleItemsError(f"All {num_items} items are excluded")
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    if 2 * eligible_count < num_items:
        eligible = np.setdiff1d(np.arange(1, num_items + 1, dtype=np.int64), blocked)
        return eligible[rng.integers(0, eligible.size, size=n)]
    drawn = np.empty(n, dtype=np.int64)
    filled = 0
    while filled < n:
        candidates = np.asarray(rng.integers(1, num_items + 1, size=n - filled), dtype=np.int64)
        accepted = candidates[~np.isin(candidates, blocked)]
        drawn[filled:filled + accepted.size] = accepted
        filled += accepted.size
    return drawn


@dataclass
class MarkovChain:
    """A sampled transition matrix and the walks drawn from it (0-based states)."""
    transitions: npt.NDArray[np.float64]
    walks: npt.NDArray[np.int64]


def sample_markov_chain(
    num_users: int, num_items: int, seq_len: int, concentration: float, seed: int
) -> MarkovChain:
    """Draw Dirichlet transition rows, then one chain walk per user."""
    if num_items < 2:
        raise DatasetError("num_items must be at least 2")
    if concentration <= 0:
        raise DatasetError("concentration must be positive")
    rng = RngStream(seed, "synth")
    transitions = rng.dirichlet(concentration, num_items, num_items)
    cumulative = np.cumsum(transitions, axis=1)
    walks = np.zeros((num_users, seq_len), dtype=np.int64)
    if seq_len == 0:
        return MarkovChain(transitions, walks)
    state = np.asarray(rng.integers(0, num_items, size=num_users), dtype=np.int64)
    walks[:, 0] = state
    for step in range(1, seq_len):
        draws = rng.random(num_users)
        state = np.minimum(np.sum(cumulative[state] <= draws[:, None], axis=1), num_items - 1)
        walks[:, step] = state
    return MarkovChain(transitions, walks)


def generate_synthetic(
    num_users: int, num_items: int, seq_len: int, concentration: float, seed: int
) -> List[Interaction]:
    """Synthetic first-order Markov interactions with timestamps ``1..seq_len``.

    Small concentrations give near one-hot transition rows and therefore
    learnable, nearly deterministic sequences.
    """
    chain = sample_markov_chain(num_users, num_items, seq_len, concentration, seed)
    return [
        Interaction(f"u{user}", str(int(item) + 1), step + 1)
        for user in range(num_users)
        for step, item in enumerate(chain.walks[user])
    ]


def save_prepared(out_dir: PathLike, dataset: SplitDataset) -> None:
    """Write ``sequences.tsv`` (internal ids) and ``catalog.json``."""
    target = Path(out_dir)
    try:
        target.mkdir(parents=True, exist_ok=True)
        with (target / SEQUENCES_FILE).open("w", encoding="utf-8", newline="\n") as stream:
            for user in dataset.users:
                stream.write(f"{user.user}\t{' '.join(str(i) for i in user.items)}\n")
        catalog = {
            "users": dataset.catalog.user_index,
            "items": dataset.catalog.item_index,
            "maxlen": dataset.maxlen,
        }
        (target / CATALOG_FILE).write_text(json.dumps(catalog, indent=1), encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to write prepared dataset to {target}: {e}")
        raise DatasetError(f"Cannot write {target}: {e}") from e


def load_prepared(data_dir: PathLike, maxlen: int) -> SplitDataset:
    """Load a dataset written by :func:`save_prepared`.

    Raises:
        DatasetError: If files are missing or inconsistent
    """
    source = Path(data_dir)
    try:
        raw_catalog = json.loads((source / CATALOG_FILE).read_text(encoding="utf-8"))
        lines = (source / SEQUENCES_FILE).read_text(encoding="utf-8").splitlines()
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"Cannot load prepared dataset from {source}: {e}") from e
    catalog = Catalog(
        user_index={str(k): int(v) for k, v in raw_catalog["users"].items()},
        item_index={str(k): int(v) for k, v in raw_catalog["items"].items()},
    )
    users: List[UserSequence] = []
    for number, line in enumerate(lines, start=1):
        user_field, _, items_field = line.partition("\t")
        try:
            items = [int(i) for i in items_field.split()]
            user = int(user_field)
        except ValueError as e:
            raise ParseError(f"bad sequence record in {SEQUENCES_FILE}", line=number) from e
        if any(not catalog.is_item(i) for i in items):
            raise ParseError(f"item id outside 1..{catalog.num_items}", line=number)
        users.append(UserSequence(user, items))
    if len(users) != catalog.num_users:
        raise DatasetError(f"{SEQUENCES_FILE} has {len(users)} users, catalog has {catalog.num_users}")
    return SplitDataset(catalog=catalog, users=users, maxlen=maxlen)


@dataclass
class DatasetStats:
    """Corpus summary of a prepared dataset."""
    users: int
    items: int
    interactions: int
    avg_length: float
    density: float


def dataset_stats(dataset: SplitDataset) -> DatasetStats:
    users = dataset.catalog.num_users
    items = dataset.catalog.num_items
    interactions = dataset.num_interactions
    return DatasetStats(
        users=users,
        items=items,
        interactions=interactions,
        avg_length=interactions / users if users else 0.0,
        density=interactions / (users * items) if users and items else 0.0,
    )

