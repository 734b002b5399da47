"""Iterative flow-based re-ranking of long lists into fairer short lists.

Each round scores every remaining (item, user) recommendation edge as a
blend of the item's rank for that user and its current exposure (its own
degree, or its supplier's summed degree), builds the four-layer flow
network with evenly distributed terminal capacities, and solves max
flow. Items that had to bounce flow back to the source are exactly the
relevant-but-underexposed ones; their edges are harvested and removed,
and the loop repeats on the shrunken graph until nothing is starved.
The harvested items then replace the most exposed entries of each
user's base top-n list.

Weights are kept integral by a fixed x100 scale so that the capacity
arithmetic (ceilings and gcd) is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ExperimentConfig, RankedBatch, SupplierCatalog, truncate
from .errors import DataError, SolverStuckError, UsageError
from .flownet import FlowNetwork, low_capacity_left_nodes, solve_max_flow
from .metrics import item_visibility

WEIGHT_SCALE = 100


class RecGraph:
    """Current (item, user) recommendation pairs with frozen ranks."""

    __slots__ = ("users_by_item", "rank")

    def __init__(self, users_by_item, rank):
        self.users_by_item = {i: sorted(us) for i, us in users_by_item.items() if us}
        self.rank = rank

    @classmethod
    def from_batch(cls, batch: RankedBatch) -> "RecGraph":
        users_by_item: dict[str, list[str]] = {}
        for user in batch.users:
            for item in batch.items_of(user):
                users_by_item.setdefault(item, []).append(user)
        return cls(users_by_item, batch.rank_table())

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(sorted(self.users_by_item))

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(sorted({u for us in self.users_by_item.values() for u in us}))

    @property
    def n_pairs(self) -> int:
        return sum(len(us) for us in self.users_by_item.values())

    def degree(self, item: str) -> int:
        return len(self.users_by_item.get(item, ()))

    def remove_items(self, items) -> None:
        for item in items:
            self.users_by_item.pop(item, None)


def _normalize_to_rank_range(values: dict[str, float], t: int) -> dict[str, float]:
    """Min-max map onto [1, t]; a constant vector collapses to 1."""
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        return {k: 1.0 for k in values}
    span = (t - 1.0) / (hi - lo)
    return {k: 1.0 + (v - lo) * span for k, v in values.items()}


def _blend(lambda_: float, rank: int, exposure: float) -> int:
    return int(round(WEIGHT_SCALE * (lambda_ * rank + (1.0 - lambda_) * exposure)))


def compute_item_weights(graph: RecGraph, lambda_: float, t: int) -> dict:
    """Edge weight from rank and the item's own normalized degree."""
    if not 0.0 <= lambda_ <= 1.0:
        raise UsageError(f"lambda must lie in [0, 1], got {lambda_}")
    degrees = {i: float(graph.degree(i)) for i in graph.users_by_item}
    norm = _normalize_to_rank_range(degrees, t)
    return {
        (item, user): _blend(lambda_, graph.rank[(item, user)], norm[item])
        for item, users in graph.users_by_item.items()
        for user in users
    }


def compute_supplier_weights(
    graph: RecGraph, catalog: SupplierCatalog, lambda_: float, t: int
) -> dict:
    """Edge weight from rank and the supplier's summed current degree."""
    if not 0.0 <= lambda_ <= 1.0:
        raise UsageError(f"lambda must lie in [0, 1], got {lambda_}")
    exposure = {}
    for item in graph.users_by_item:
        supplier = catalog.supplier_of(item)
        exposure[item] = float(
            sum(graph.degree(j) for j in catalog.items_of(supplier))
        )
    norm = _normalize_to_rank_range(exposure, t)
    return {
        (item, user): _blend(lambda_, graph.rank[(item, user)], norm[item])
        for item, users in graph.users_by_item.items()
        for user in users
    }


def terminal_capacities(total_capacity: int, n_items: int, n_users: int) -> tuple[int, int]:
    """Evenly distribute the total edge capacity over both terminals.

    The per-side quotas are reduced by their gcd; the source edges get
    the smaller reduced quota and the sink edges the item-side one.
    """
    if n_items < 1 or n_users < 1:
        raise UsageError("need at least one item and one user")
    if total_capacity <= 0:
        raise DataError("degenerate graph: total edge capacity is zero")
    ceq_items = -(-total_capacity // n_items)
    ceq_users = -(-total_capacity // n_users)
    g = math.gcd(ceq_items, ceq_users)
    source_weight = min(ceq_items // g, ceq_users // g)
    sink_weight = ceq_items // g
    return source_weight, sink_weight


@dataclass(frozen=True)
class CandidateAssignment:
    """Harvested edges, per round and pooled per user in discovery order."""

    subgraphs: tuple
    candidates_by_user: dict


@dataclass(frozen=True)
class RerankResult:
    final: RankedBatch
    assignment: CandidateAssignment
    iterations: int
    stats: tuple


def flow_rerank(
    long_lists: RankedBatch,
    catalog: SupplierCatalog | None,
    config: ExperimentConfig,
) -> RerankResult:
    """Run the full harvest-and-rebuild loop on a batch of long lists."""
    if long_lists.list_size != config.t:
        raise UsageError(
            f"batch carries lists of size {long_lists.list_size}, config says t={config.t}"
        )
    if config.variant == "supplier" and catalog is None:
        raise UsageError("supplier variant requires a supplier catalog")
    graph = RecGraph.from_batch(long_lists)
    max_rounds = len(graph.items)
    subgraphs = []
    candidates_by_user: dict[str, list[str]] = {}
    stats = []
    iteration = 0
    while graph.n_pairs > 0:
        iteration += 1
        if iteration > max_rounds + 1:
            raise SolverStuckError("re-ranking loop failed to shrink the graph")
        if config.variant == "item":
            weights = compute_item_weights(graph, config.lambda_, config.t)
        else:
            weights = compute_supplier_weights(graph, catalog, config.lambda_, config.t)
        source_w, sink_w = terminal_capacities(
            sum(weights.values()), len(graph.users_by_item), len(graph.users)
        )
        net = FlowNetwork.from_edges(weights, source_w, sink_w)
        solver = solve_max_flow(net)
        found = sorted(low_capacity_left_nodes(solver, net))
        if not found:
            stats.append(_stat(iteration, graph, 0))
            break
        subgraph = tuple(
            (item, user, weights[(item, user)])
            for item in found
            for user in graph.users_by_item[item]
        )
        subgraphs.append(subgraph)
        for item in found:
            for user in graph.users_by_item[item]:
                candidates_by_user.setdefault(user, []).append(item)
        graph.remove_items(found)
        stats.append(_stat(iteration, graph, len(found)))
    assignment = CandidateAssignment(
        subgraphs=tuple(subgraphs),
        candidates_by_user={u: tuple(v) for u, v in candidates_by_user.items()},
    )
    base = truncate(long_lists, config.n)
    final = reconstruct_lists(
        long_lists, assignment, config.n, config.beta, item_visibility(base)
    )
    return RerankResult(
        final=final, assignment=assignment, iterations=iteration, stats=tuple(stats)
    )


def _stat(iteration: int, graph: RecGraph, found: int) -> dict:
    return {
        "iteration": iteration,
        "items_remaining": len(graph.users_by_item),
        "pairs_remaining": graph.n_pairs,
        "candidates_found": found,
    }


def reconstruct_lists(
    long_lists: RankedBatch,
    assignment: CandidateAssignment,
    n: int,
    beta: float,
    base_visibility: dict,
) -> RankedBatch:
    """Swap each user's most exposed base entries for harvested items.

    Per user: drop the floor(beta*n)-or-fewer most visible base items
    (ties drop the worse-ranked first), append that many harvested items
    in ascending visibility (ties by rank, then id), skipping anything
    already kept, then fill any shortfall from the long-list overflow.
    """
    if not 0.0 < beta <= 1.0:
        raise UsageError(f"beta must lie in (0, 1], got {beta}")
    r_target = int(math.floor(beta * n))
    rank = long_lists.rank_table()
    lists = {}
    short = False
    for user in long_lists.users:
        long_list = long_lists.list_of(user)
        base_list = long_list[:n]
        candidates = assignment.candidates_by_user.get(user, ())
        r = min(r_target, len(candidates))
        if r == 0:
            lists[user] = base_list
            continue
        by_exposure = sorted(
            range(len(base_list)),
            key=lambda pos: (base_visibility.get(base_list[pos][0], 0.0), pos),
        )
        dropped = {base_list[pos][0] for pos in by_exposure[-r:]}
        retained = [entry for entry in base_list if entry[0] not in dropped]
        kept_items = {entry[0] for entry in retained}
        score_of = dict(long_list)
        appended = []
        for item in sorted(
            dict.fromkeys(candidates),
            key=lambda i: (base_visibility.get(i, 0.0), rank[(i, user)], i),
        ):
            if len(appended) == r:
                break
            if item in kept_items:
                continue
            appended.append(item)
        chosen = retained + [(i, score_of[i]) for i in appended]
        if len(chosen) < n:
            have = {i for i, _ in chosen}
            for item, score in long_list[n:]:
                if len(chosen) >= n:
                    break
                if item not in have:
                    chosen.append((item, score))
        if len(chosen) < n:
            short = True
        lists[user] = chosen
    return RankedBatch(lists, n, strict=not short)
