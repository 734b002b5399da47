"""The two extreme re-rankers that bracket the accuracy/exposure trade-off."""

from __future__ import annotations

import numpy as np

from .core import RankedBatch
from .errors import UsageError


def reverse_rerank(long_lists: RankedBatch, n: int) -> RankedBatch:
    """Take the last n entries of each list, least relevant first."""
    if n > long_lists.list_size:
        raise UsageError(f"n ({n}) exceeds list size {long_lists.list_size}")
    lists = {
        user: tuple(reversed(long_lists.list_of(user)[-n:]))
        for user in long_lists.users
    }
    return RankedBatch(lists, n, strict=False)


def random_rerank(long_lists: RankedBatch, n: int, seed: int = 0) -> RankedBatch:
    """Uniform n-subset of each list, emitted in original score order.

    Each user draws from an independent stream derived from the master
    seed and the user's position, so runs are reproducible and users
    can be processed in parallel.
    """
    if n > long_lists.list_size:
        raise UsageError(f"n ({n}) exceeds list size {long_lists.list_size}")
    lists = {}
    for idx, user in enumerate(long_lists.users):
        entries = long_lists.list_of(user)
        rng = np.random.default_rng([seed, idx])
        keep = sorted(rng.choice(len(entries), size=min(n, len(entries)), replace=False))
        lists[user] = tuple(entries[k] for k in keep)
    return RankedBatch(lists, n, strict=False)
