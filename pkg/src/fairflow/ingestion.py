"""File ingestion, preprocessing, and the shared on-disk formats.

Ratings files are UTF-8 text with one record per line, tab- or
comma-separated: userId, itemId, value[, timestamp]. Supplier maps are
two-column files in the same dialect. Ranked-batch files carry userId,
itemId, score, rank with ranks ascending per user. Lines starting with
'#' are comments everywhere.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import InteractionDataset, RankedBatch, SupplierCatalog
from .errors import DataError, ParseError, UsageError

_DELIMS = {"tsv": "\t", "csv": ","}


def _rows(path, fmt):
    delim = _DELIMS.get(fmt)
    if delim is None:
        raise UsageError(f"unknown format {fmt!r}, expected 'tsv' or 'csv'")
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            yield line_no, line.split(delim)


def parse_ratings(path, fmt: str = "tsv") -> InteractionDataset:
    """Parse a ratings/interactions file into a dataset.

    Duplicate (user, item) rows collapse to the last occurrence. A
    trailing timestamp column is accepted and ignored.
    """
    latest: dict[tuple[str, str], float] = {}
    n_rows = 0
    for line_no, fields in _rows(path, fmt):
        if len(fields) not in (3, 4):
            raise ParseError(path, line_no, f"expected 3 or 4 fields, got {len(fields)}")
        user, item, raw = fields[0].strip(), fields[1].strip(), fields[2].strip()
        if not user or not item:
            raise ParseError(path, line_no, "empty user or item id")
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(path, line_no, f"bad value {raw!r}") from None
        latest[(user, item)] = value
        n_rows += 1
    if n_rows == 0:
        raise DataError(f"{path}: no data rows")
    return InteractionDataset([(u, i, v) for (u, i), v in latest.items()])


def write_ratings(ds: InteractionDataset, path, fmt: str = "tsv") -> None:
    delim = _DELIMS[fmt]
    with open(path, "w", encoding="utf-8") as fh:
        for user, item, value in sorted(ds.interactions):
            fh.write(f"{user}{delim}{item}{delim}{value!r}\n")


def parse_supplier_map(path, fmt: str = "tsv", dataset=None) -> SupplierCatalog:
    """Parse an item -> supplier map; conflicting rows are an error.

    When a dataset is given, the catalog is restricted to its items and
    items without a supplier are reported as a hard error.
    """
    mapping: dict[str, str] = {}
    for line_no, fields in _rows(path, fmt):
        if len(fields) != 2:
            raise ParseError(path, line_no, f"expected 2 fields, got {len(fields)}")
        item, supplier = fields[0].strip(), fields[1].strip()
        if not item or not supplier:
            raise ParseError(path, line_no, "empty item or supplier id")
        if item in mapping and mapping[item] != supplier:
            raise DataError(
                f"{path}:{line_no}: item {item!r} mapped to both "
                f"{mapping[item]!r} and {supplier!r}"
            )
        mapping[item] = supplier
    if dataset is not None:
        missing = sorted(set(dataset.items) - set(mapping))
        if missing:
            shown = ", ".join(missing[:10])
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            raise DataError(f"items without a supplier: {shown}{more}")
        mapping = {i: mapping[i] for i in dataset.items}
    return SupplierCatalog(mapping)


def write_supplier_map(catalog: SupplierCatalog, path, fmt: str = "tsv") -> None:
    delim = _DELIMS[fmt]
    with open(path, "w", encoding="utf-8") as fh:
        for item in catalog.items:
            fh.write(f"{item}{delim}{catalog.supplier_of(item)}\n")


def interactions_to_ratings(raw: InteractionDataset, levels: int = 5) -> InteractionDataset:
    """Map per-user interaction counts onto a 1..levels rating scale.

    Each item's rating is the ceiling of its empirical quantile within the
    user's own count distribution, scaled to the number of levels. More
    interactions never yield a lower rating, and a user whose counts are
    all identical rates everything at the top level.
    """
    converted = []
    by_user: dict[str, list[tuple[str, float]]] = {}
    for user, item, count in raw.interactions:
        if count < 1:
            raise DataError(f"non-positive count {count!r} for ({user}, {item})")
        by_user.setdefault(user, []).append((item, count))
    for user, pairs in by_user.items():
        counts = sorted(c for _, c in pairs)
        m = len(counts)
        for item, c in pairs:
            # empirical CDF of c within this user's counts
            below_or_eq = _count_leq(counts, c)
            rating = math.ceil(levels * below_or_eq / m)
            converted.append((user, item, float(rating)))
    return InteractionDataset(converted)


def _count_leq(sorted_values, x) -> int:
    lo, hi = 0, len(sorted_values)
    while lo < hi:
        mid = (lo + hi) // 2
        if sorted_values[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def apply_core_filter(
    ds: InteractionDataset,
    min_user_ratings: int = 0,
    min_item_ratings: int = 0,
    sample_users: int | None = None,
    seed: int = 0,
    iterate: bool = False,
) -> InteractionDataset:
    """Drop sparse users, then sparse items, then optionally sample users.

    The user and item thresholds are applied once each, in that order;
    item filtering may push some users back under the user threshold.
    Pass iterate=True to repeat both passes until nothing changes.
    """
    if min_user_ratings < 0 or min_item_ratings < 0:
        raise UsageError("thresholds must be non-negative")
    triples = list(ds.interactions)
    while True:
        before = len(triples)
        user_counts: dict[str, int] = {}
        for u, _, _ in triples:
            user_counts[u] = user_counts.get(u, 0) + 1
        triples = [t for t in triples if user_counts[t[0]] >= min_user_ratings]
        item_counts: dict[str, int] = {}
        for _, i, _ in triples:
            item_counts[i] = item_counts.get(i, 0) + 1
        triples = [t for t in triples if item_counts[t[1]] >= min_item_ratings]
        if not iterate or len(triples) == before:
            break
    if sample_users is not None:
        survivors = sorted({u for u, _, _ in triples})
        if sample_users > len(survivors):
            raise UsageError(
                f"cannot sample {sample_users} users from {len(survivors)} survivors"
            )
        rng = np.random.default_rng(seed)
        chosen = set(rng.choice(survivors, size=sample_users, replace=False))
        triples = [t for t in triples if t[0] in chosen]
    return InteractionDataset(triples)


def split_train_test(
    ds: InteractionDataset, train_fraction: float, seed: int = 0
) -> tuple[InteractionDataset, InteractionDataset]:
    """Per-user random split: floor(fraction * |profile|) rows to train.

    Users with fewer than two interactions go entirely to train (with a
    warning) so that every training user has at least one row.
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train fraction must lie in (0, 1), got {train_fraction}")
    by_user: dict[str, list[tuple[str, str, float]]] = {}
    for t in ds.interactions:
        by_user.setdefault(t[0], []).append(t)
    train, test = [], []
    for idx, user in enumerate(sorted(by_user)):
        rows = sorted(by_user[user])
        if len(rows) < 2:
            warnings.warn(f"user {user!r} has {len(rows)} interaction(s); kept in train")
            train.extend(rows)
            continue
        rng = np.random.default_rng([seed, idx])
        order = rng.permutation(len(rows))
        cut = int(math.floor(train_fraction * len(rows)))
        train.extend(rows[k] for k in order[:cut])
        test.extend(rows[k] for k in order[cut:])
    return InteractionDataset(train), InteractionDataset(test)


def read_ranked_batch(
    path,
    t: int | None = None,
    fmt: str = "tsv",
    require_sorted_scores: bool = True,
) -> RankedBatch:
    """Read a ranked-batch file, validating rank contiguity.

    Rows are userId, itemId, score, rank. Every user must carry ranks
    1..t exactly once; when t is omitted it is inferred as the largest
    rank in the file. Score order must agree with rank order for base
    lists; pass require_sorted_scores=False for re-ranked output, whose
    positions intentionally no longer follow the scores.
    """
    per_user: dict[str, dict[int, tuple[str, float]]] = {}
    for line_no, fields in _rows(path, fmt):
        if len(fields) != 4:
            raise ParseError(path, line_no, f"expected 4 fields, got {len(fields)}")
        user, item, raw_score, raw_rank = (f.strip() for f in fields)
        try:
            score = float(raw_score)
            rank = int(raw_rank)
        except ValueError:
            raise ParseError(path, line_no, "bad score or rank") from None
        slots = per_user.setdefault(user, {})
        if rank in slots:
            raise DataError(f"{path}: duplicate rank {rank} for user {user!r}")
        slots[rank] = (item, score)
    if not per_user:
        raise DataError(f"{path}: no data rows")
    if t is None:
        t = max(max(slots) for slots in per_user.values())
    lists = {}
    for user, slots in per_user.items():
        if sorted(slots) != list(range(1, t + 1)):
            raise DataError(
                f"{path}: user {user!r} ranks are not contiguous 1..{t}"
            )
        entries = [slots[r] for r in range(1, t + 1)]
        scores = [s for _, s in entries]
        if require_sorted_scores and any(a < b for a, b in zip(scores, scores[1:])):
            raise DataError(
                f"{path}: user {user!r} scores increase with rank"
            )
        lists[user] = entries
    return RankedBatch(lists, t)


def write_ranked_batch(batch: RankedBatch, path, fmt: str = "tsv") -> None:
    delim = _DELIMS[fmt]
    with open(path, "w", encoding="utf-8") as fh:
        for user in batch.users:
            for pos, (item, score) in enumerate(batch.list_of(user)):
                fh.write(f"{user}{delim}{item}{delim}{score!r}{delim}{pos + 1}\n")


def dataset_stats(ds: InteractionDataset, catalog: SupplierCatalog | None = None) -> dict:
    n_users = len(ds.user_index)
    n_items = len(ds.item_index)
    stats = {
        "users": n_users,
        "items": n_items,
        "interactions": len(ds),
        "density": len(ds) / (n_users * n_items) if n_users and n_items else 0.0,
    }
    if catalog is not None:
        stats["suppliers"] = len(catalog.suppliers)
    return stats
