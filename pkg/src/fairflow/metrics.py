"""Accuracy and exposure metrics over recommendation batches.

Visibility of an item is the fraction of users' lists it appears in;
a supplier's visibility is the sum over its items. Concentration
measures (Gini, entropy) are taken over the full catalog, including
entities that were never recommended, after normalizing visibilities
into a probability vector. Entropy uses the natural logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import InteractionDataset, RankedBatch, SupplierCatalog
from .errors import DataError, UsageError


def item_visibility(batch: RankedBatch, items=None) -> dict[str, float]:
    """Fraction of lists containing each item; zeros for extra `items`."""
    n_lists = len(batch)
    vis = {i: 0.0 for i in items} if items is not None else {}
    if n_lists == 0:
        return vis
    for user in batch.users:
        for item in batch.items_of(user):
            vis[item] = vis.get(item, 0.0) + 1.0
    return {i: v / n_lists for i, v in vis.items()}


def supplier_visibility(
    item_vis: dict[str, float], catalog: SupplierCatalog, suppliers=None
) -> dict[str, float]:
    universe = catalog.suppliers if suppliers is None else tuple(suppliers)
    out = {s: 0.0 for s in universe}
    for item, v in item_vis.items():
        s = catalog.supplier_of(item)
        if s in out:
            out[s] += v
    return out


@dataclass(frozen=True)
class VisibilityTable:
    """Per-item and per-supplier visibility over the full catalog."""

    items: dict[str, float]
    suppliers: dict[str, float]


def visibility_table(batch: RankedBatch, catalog: SupplierCatalog) -> VisibilityTable:
    iv = item_visibility(batch, items=catalog.items)
    sv = supplier_visibility(iv, catalog)
    return VisibilityTable(items=iv, suppliers=sv)


def precision(batch: RankedBatch, test: InteractionDataset) -> float:
    """Mean fraction of each list found in the user's test profile."""
    if len(batch) == 0:
        return 0.0
    total = 0.0
    for user in batch.users:
        hits = set(batch.items_of(user)) & test.items_of(user)
        total += len(hits) / batch.list_size
    return total / len(batch)


def bin_by_visibility(visibility: dict[str, float], n_groups: int = 10):
    """Split entities into visibility-ordered groups, most visible first.

    Sizes differ by at most one; any remainder goes to the earliest
    groups. Ties sort by ascending entity id.
    """
    if len(visibility) < n_groups:
        raise UsageError(
            f"need at least {n_groups} entities to form groups, have {len(visibility)}"
        )
    ordered = sorted(visibility, key=lambda e: (-visibility[e], e))
    base, extra = divmod(len(ordered), n_groups)
    groups = []
    start = 0
    for g in range(n_groups):
        size = base + (1 if g < extra else 0)
        groups.append(tuple(ordered[start : start + size]))
        start += size
    return tuple(groups)


def group_visibility_shift(
    base_top_n: RankedBatch,
    reranked: RankedBatch,
    long_lists: RankedBatch,
    catalog: SupplierCatalog,
    level: str = "items",
    n_groups: int = 10,
):
    """Relative change of mean group visibility, reranked vs base.

    Groups come from visibility in the long lists; only entities that
    actually appear there are grouped. A group invisible in the base
    batch gets None (the shift ratio is undefined there).
    """
    if level == "items":
        ref = item_visibility(long_lists)
        base_vis = item_visibility(base_top_n)
        rr_vis = item_visibility(reranked)
    elif level == "suppliers":
        ref = supplier_visibility(item_visibility(long_lists), catalog)
        base_vis = supplier_visibility(item_visibility(base_top_n), catalog)
        rr_vis = supplier_visibility(item_visibility(reranked), catalog)
    else:
        raise UsageError(f"level must be 'items' or 'suppliers', got {level!r}")
    ref = {e: v for e, v in ref.items() if v > 0}
    groups = bin_by_visibility(ref, n_groups)
    shifts = []
    for members in groups:
        igv_base = sum(base_vis.get(e, 0.0) for e in members) / len(members)
        igv_rr = sum(rr_vis.get(e, 0.0) for e in members) / len(members)
        if igv_base == 0.0:
            shifts.append(None)
        else:
            shifts.append((igv_rr - igv_base) / igv_base)
    return shifts


def _rec_counts(batch: RankedBatch) -> dict[str, int]:
    counts: dict[str, int] = {}
    for user in batch.users:
        for item in batch.items_of(user):
            counts[item] = counts.get(item, 0) + 1
    return counts


def alpha_aggregate_diversity(
    batch: RankedBatch, catalog: SupplierCatalog, level: str, alpha: int
) -> float:
    """Fraction of the catalog recommended at least alpha times."""
    if alpha < 1:
        raise UsageError(f"alpha must be at least 1, got {alpha}")
    counts = _rec_counts(batch)
    if level == "items":
        universe = catalog.items
        reached = sum(1 for i in universe if counts.get(i, 0) >= alpha)
    elif level == "suppliers":
        universe = catalog.suppliers
        reached = 0
        for s in universe:
            total = sum(counts.get(i, 0) for i in catalog.items_of(s))
            if total >= alpha:
                reached += 1
    else:
        raise UsageError(f"level must be 'items' or 'suppliers', got {level!r}")
    return reached / len(universe)


def long_tail_coverage(batch: RankedBatch, train: InteractionDataset):
    """Coverage of the items outside the smallest 20%-of-ratings head set."""
    if len(train) == 0:
        raise DataError("empty training set")
    counts: dict[str, int] = {}
    for _, item, _ in train.interactions:
        counts[item] = counts.get(item, 0) + 1
    ordered = sorted(counts, key=lambda i: (-counts[i], i))
    threshold = 0.2 * sum(counts.values())
    cum = 0
    head = set()
    for item in ordered:
        head.add(item)
        cum += counts[item]
        if cum >= threshold:
            break
    tail = [i for i in ordered if i not in head]
    if not tail:
        return None
    recommended = batch.all_items()
    return sum(1 for i in tail if i in recommended) / len(tail)


def _normalize(visibility: dict[str, float]):
    total = sum(visibility.values())
    if total <= 0:
        return None
    return [v / total for v in visibility.values()]


def gini_index(visibility: dict[str, float]):
    """Concentration of the normalized visibility distribution.

    0 for a uniform distribution, 1 when a single entity holds all
    visibility; None when nothing is visible at all.
    """
    p = _normalize(visibility)
    if p is None or len(p) < 2:
        return None
    p.sort()
    n = len(p)
    return sum((2 * k - n - 1) * pk for k, pk in enumerate(p, start=1)) / (n - 1)


def entropy(visibility: dict[str, float]):
    """Shannon entropy (natural log) of the normalized visibilities."""
    p = _normalize(visibility)
    if p is None:
        return None
    return -sum(pk * math.log(pk) for pk in p if pk > 0)


def mcnemar(batch_a: RankedBatch, batch_b: RankedBatch, test: InteractionDataset):
    """Paired significance test over per-(user, test item) hits.

    Pairs are the test items each user saw in either batch; discordant
    counts feed the continuity-corrected chi-square statistic with one
    degree of freedom. Returns (None, None) when there is no discordance.
    """
    if set(batch_a.users) != set(batch_b.users):
        raise DataError("batches cover different user sets")
    b = c = 0
    for user in batch_a.users:
        hits_a = set(batch_a.items_of(user))
        hits_b = set(batch_b.items_of(user))
        for item in test.items_of(user) & (hits_a | hits_b):
            in_a, in_b = item in hits_a, item in hits_b
            if in_a and not in_b:
                b += 1
            elif in_b and not in_a:
                c += 1
    if b + c == 0:
        return None, None
    stat = (abs(b - c) - 1) ** 2 / (b + c)
    p_value = math.erfc(math.sqrt(stat / 2.0))
    return stat, p_value


CSV_COLUMNS = ("P", "1-IA", "5-IA", "LT", "1-SA", "5-SA", "IG", "IE", "SG", "SE")


@dataclass
class MetricReport:
    """The full evaluation panel for one batch."""

    precision: float
    item_agg: dict[int, float]
    supplier_agg: dict[int, float]
    long_tail: float | None
    item_gini: float | None
    item_entropy: float | None
    supplier_gini: float | None
    supplier_entropy: float | None
    item_shifts: list | None = None
    supplier_shifts: list | None = None
    mcnemar_stat: float | None = None
    mcnemar_p: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "P": self.precision,
            "1-IA": self.item_agg.get(1),
            "5-IA": self.item_agg.get(5),
            "LT": self.long_tail,
            "1-SA": self.supplier_agg.get(1),
            "5-SA": self.supplier_agg.get(5),
            "IG": self.item_gini,
            "IE": self.item_entropy,
            "SG": self.supplier_gini,
            "SE": self.supplier_entropy,
        }
        for alpha in sorted(self.item_agg):
            if alpha not in (1, 5):
                out[f"{alpha}-IA"] = self.item_agg[alpha]
        for alpha in sorted(self.supplier_agg):
            if alpha not in (1, 5):
                out[f"{alpha}-SA"] = self.supplier_agg[alpha]
        if self.item_shifts is not None:
            out["IVS"] = self.item_shifts
        if self.supplier_shifts is not None:
            out["SVS"] = self.supplier_shifts
        if self.mcnemar_stat is not None:
            out["mcnemar_statistic"] = self.mcnemar_stat
            out["mcnemar_p"] = self.mcnemar_p
        out.update(self.extras)
        return out

    def csv_row(self) -> list[str]:
        data = self.to_dict()
        return [_fmt(data[col]) for col in CSV_COLUMNS]


def _fmt(value) -> str:
    if value is None:
        return "NA"
    return repr(float(value))


def evaluate_batch(
    final: RankedBatch,
    test: InteractionDataset,
    train: InteractionDataset,
    catalog: SupplierCatalog,
    alphas=(1, 5),
    base: RankedBatch | None = None,
    long_lists: RankedBatch | None = None,
    mcnemar_against: RankedBatch | None = None,
) -> MetricReport:
    """Compute the whole panel; group shifts need base and long lists."""
    alphas = sorted(set(alphas) | {1, 5})
    table = visibility_table(final, catalog)
    report = MetricReport(
        precision=precision(final, test),
        item_agg={a: alpha_aggregate_diversity(final, catalog, "items", a) for a in alphas},
        supplier_agg={
            a: alpha_aggregate_diversity(final, catalog, "suppliers", a) for a in alphas
        },
        long_tail=long_tail_coverage(final, train),
        item_gini=gini_index(table.items),
        item_entropy=entropy(table.items),
        supplier_gini=gini_index(table.suppliers),
        supplier_entropy=entropy(table.suppliers),
    )
    if base is not None and long_lists is not None:
        report.item_shifts = group_visibility_shift(
            base, final, long_lists, catalog, "items"
        )
        report.supplier_shifts = group_visibility_shift(
            base, final, long_lists, catalog, "suppliers"
        )
    if mcnemar_against is not None:
        report.mcnemar_stat, report.mcnemar_p = mcnemar(final, mcnemar_against, test)
    return report
