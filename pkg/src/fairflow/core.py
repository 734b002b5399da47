"""Shared domain types: interaction data, supplier catalogs, ranked lists.

All types are immutable after construction, so they can be shared freely
across concurrent re-ranking runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import DataError, UsageError


class InteractionDataset:
    """User/item/value triples plus dense integer indices for both sides.

    Ids are opaque strings at the boundary; the dense indices exist so that
    numeric code (similarity matrices, flow networks) can work on arrays.
    Duplicate (user, item) pairs are rejected here; deduplication is the
    parser's job.
    """

    __slots__ = ("interactions", "user_index", "item_index", "_by_user")

    def __init__(self, interactions):
        triples = []
        seen = set()
        by_user: dict[str, dict[str, float]] = {}
        for user, item, value in interactions:
            user, item, value = str(user), str(item), float(value)
            if value < 0:
                raise DataError(f"negative value {value!r} for ({user}, {item})")
            if (user, item) in seen:
                raise DataError(f"duplicate interaction ({user}, {item})")
            seen.add((user, item))
            triples.append((user, item, value))
            by_user.setdefault(user, {})[item] = value
        self.interactions = tuple(triples)
        self.user_index = {u: k for k, u in enumerate(sorted(by_user))}
        items = sorted({item for _, item, _ in triples})
        self.item_index = {i: k for k, i in enumerate(items)}
        self._by_user = {u: dict(profile) for u, profile in by_user.items()}

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(self.user_index)

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(self.item_index)

    def profile(self, user: str) -> dict[str, float]:
        """Items the user interacted with, mapped to their values."""
        return dict(self._by_user.get(user, {}))

    def items_of(self, user: str) -> frozenset[str]:
        return frozenset(self._by_user.get(user, ()))

    def __len__(self) -> int:
        return len(self.interactions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionDataset):
            return NotImplemented
        return sorted(self.interactions) == sorted(other.interactions)

    def __repr__(self) -> str:
        return (
            f"InteractionDataset({len(self.interactions)} interactions, "
            f"{len(self.user_index)} users, {len(self.item_index)} items)"
        )


class SupplierCatalog:
    """Total mapping from items to their unique supplier, with the inverse."""

    __slots__ = ("item_to_supplier", "supplier_to_items")

    def __init__(self, item_to_supplier):
        mapping = {str(i): str(s) for i, s in dict(item_to_supplier).items()}
        inverse: dict[str, set[str]] = {}
        for item, supplier in mapping.items():
            inverse.setdefault(supplier, set()).add(item)
        self.item_to_supplier = mapping
        self.supplier_to_items = {
            s: tuple(sorted(items)) for s, items in inverse.items()
        }

    @classmethod
    def from_pairs(cls, pairs) -> "SupplierCatalog":
        """Build from (item, supplier) pairs, rejecting conflicting rows."""
        mapping: dict[str, str] = {}
        for item, supplier in pairs:
            item, supplier = str(item), str(supplier)
            if item in mapping and mapping[item] != supplier:
                raise DataError(
                    f"item {item!r} mapped to both {mapping[item]!r} and {supplier!r}"
                )
            mapping[item] = supplier
        return cls(mapping)

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(sorted(self.item_to_supplier))

    @property
    def suppliers(self) -> tuple[str, ...]:
        return tuple(sorted(self.supplier_to_items))

    def supplier_of(self, item: str) -> str:
        try:
            return self.item_to_supplier[item]
        except KeyError:
            raise DataError(f"item {item!r} has no supplier") from None

    def items_of(self, supplier: str) -> tuple[str, ...]:
        return self.supplier_to_items.get(supplier, ())

    def restrict(self, items) -> "SupplierCatalog":
        """Catalog reduced to the given items (all must be mapped)."""
        return SupplierCatalog({i: self.supplier_of(i) for i in items})

    def __len__(self) -> int:
        return len(self.item_to_supplier)


class RankedBatch:
    """Per-user ordered recommendation lists of a fixed size.

    The rank of the entry at position k is k + 1. Lists built from raw
    scores via :meth:`from_scores` are ordered by descending score with
    ties broken by ascending item id; re-ranked outputs keep whatever
    positional order their construction dictates.
    """

    __slots__ = ("_lists", "list_size")

    def __init__(self, lists_by_user, list_size: int, strict: bool = True):
        if list_size < 1:
            raise UsageError(f"list size must be positive, got {list_size}")
        out: dict[str, tuple[tuple[str, float], ...]] = {}
        for user, entries in lists_by_user.items():
            entries = tuple((str(i), float(s)) for i, s in entries)
            items = [i for i, _ in entries]
            if len(set(items)) != len(items):
                raise DataError(f"duplicate item in list for user {user!r}")
            if len(entries) > list_size:
                raise DataError(
                    f"list for user {user!r} has {len(entries)} entries, "
                    f"expected at most {list_size}"
                )
            if strict and len(entries) != list_size:
                raise DataError(
                    f"list for user {user!r} has {len(entries)} entries, "
                    f"expected {list_size}"
                )
            out[str(user)] = entries
        self._lists = out
        self.list_size = int(list_size)

    @classmethod
    def from_scores(cls, scored_by_user, list_size: int, strict: bool = True):
        """Sort each user's (item, score) pairs by descending score, then id."""
        ordered = {
            user: sorted(entries, key=lambda e: (-float(e[1]), str(e[0])))
            for user, entries in scored_by_user.items()
        }
        return cls(ordered, list_size, strict=strict)

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(sorted(self._lists))

    def list_of(self, user: str) -> tuple[tuple[str, float], ...]:
        return self._lists[user]

    def items_of(self, user: str) -> tuple[str, ...]:
        return tuple(i for i, _ in self._lists[user])

    def all_items(self) -> frozenset[str]:
        return frozenset(i for lst in self._lists.values() for i, _ in lst)

    def rank_table(self) -> dict[tuple[str, str], int]:
        """(item, user) -> 1-based rank in that user's list."""
        table = {}
        for user, entries in self._lists.items():
            for pos, (item, _) in enumerate(entries):
                table[(item, user)] = pos + 1
        return table

    def restrict(self, users) -> "RankedBatch":
        keep = set(users)
        return RankedBatch(
            {u: lst for u, lst in self._lists.items() if u in keep},
            self.list_size,
            strict=False,
        )

    def __len__(self) -> int:
        return len(self._lists)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankedBatch):
            return NotImplemented
        return self.list_size == other.list_size and self._lists == other._lists

    def __repr__(self) -> str:
        return f"RankedBatch({len(self._lists)} users, list size {self.list_size})"


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs for one re-ranking run.

    t is the long-list size, n the final size, lambda_ the relevance vs
    exposure trade-off, beta the fraction of the final list open to
    replacement, variant selects item- or supplier-level exposure.
    """

    t: int = 50
    n: int = 10
    lambda_: float = 0.5
    beta: float = 1.0
    variant: str = "item"
    seed: int = 0

    def __post_init__(self):
        if self.t <= self.n:
            raise UsageError(f"t ({self.t}) must exceed n ({self.n})")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise UsageError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if not 0.0 < self.beta <= 1.0:
            raise UsageError(f"beta must lie in (0, 1], got {self.beta}")
        if self.variant not in ("item", "supplier"):
            raise UsageError(f"variant must be 'item' or 'supplier', got {self.variant!r}")
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed}")


def truncate(batch: RankedBatch, n: int) -> RankedBatch:
    """First n entries of every list, order preserved."""
    if n > batch.list_size:
        raise UsageError(
            f"cannot truncate lists of size {batch.list_size} to {n}"
        )
    return RankedBatch(
        {u: batch.list_of(u)[:n] for u in batch.users}, n, strict=False
    )


def warn_short_list(user: str, have: int, want: int) -> None:
    warnings.warn(
        f"user {user!r}: only {have} items available for a list of {want}",
        stacklevel=3,
    )
