"""Bipartite flow network and a FIFO push-relabel max-flow solver.

The network has four layers: a source, the item (left) nodes, the user
(right) nodes, and a sink. Every source edge carries the same capacity,
as does every sink edge; the item-user edges carry the exposure-aware
weights. After the solver terminates, left nodes whose final label is at
least the source's initial label are exactly the items that had to send
excess flow back to the source, which downstream code treats as the
starved, promotable items.

Capacities are non-negative integers throughout, so termination and the
flow value are exact.
"""

from __future__ import annotations

from collections import deque

from .core import RankedBatch
from .errors import DataError, SolverStuckError


class FlowNetwork:
    """Source + items + users + sink with paired residual arcs.

    Node indices: 0 is the source, 1..n_items the items (sorted by id),
    then the users (sorted by id), and the last index is the sink.
    """

    __slots__ = (
        "item_ids", "user_ids", "_item_node", "_user_node",
        "to", "cap", "flow", "adj",
    )

    def __init__(self, item_ids, user_ids):
        self.item_ids = tuple(sorted(item_ids))
        self.user_ids = tuple(sorted(user_ids))
        self._item_node = {i: k + 1 for k, i in enumerate(self.item_ids)}
        offset = 1 + len(self.item_ids)
        self._user_node = {u: k + offset for k, u in enumerate(self.user_ids)}
        self.to: list[int] = []
        self.cap: list[int] = []
        self.flow: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(self.n_nodes)]

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_nodes(self) -> int:
        return len(self.item_ids) + len(self.user_ids) + 2

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n_nodes - 1

    def item_node(self, item_id) -> int:
        return self._item_node[item_id]

    def user_node(self, user_id) -> int:
        return self._user_node[user_id]

    def node_name(self, v: int) -> str:
        if v == self.source:
            return "s1"
        if v == self.sink:
            return "s2"
        if v <= self.n_items:
            return f"i:{self.item_ids[v - 1]}"
        return f"u:{self.user_ids[v - 1 - self.n_items]}"

    def add_edge(self, u: int, v: int, capacity: int) -> int:
        """Add a forward edge and its zero-capacity reverse arc."""
        if capacity < 0 or capacity != int(capacity):
            raise DataError(f"capacity must be a non-negative integer, got {capacity!r}")
        e = len(self.to)
        self.to.extend((v, u))
        self.cap.extend((int(capacity), 0))
        self.flow.extend((0, 0))
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e

    def residual(self, e: int) -> int:
        return self.cap[e] - self.flow[e]

    def edge_index(self, u: int, v: int) -> int | None:
        """First arc u -> v with positive residual capacity, if any."""
        for e in self.adj[u]:
            if self.to[e] == v and self.residual(e) > 0:
                return e
        return None

    def source_edge(self, item_id) -> int:
        v = self._item_node[item_id]
        for e in self.adj[self.source]:
            if e % 2 == 0 and self.to[e] == v:
                return e
        raise DataError(f"no source edge for item {item_id!r}")

    def node_balance(self, v: int) -> int:
        """Inflow minus outflow at v, recomputed from edge flows."""
        total = 0
        for e in self.adj[v]:
            total -= self.flow[e]
        return total

    @classmethod
    def from_edges(cls, edge_weights, source_weight: int, sink_weight: int):
        """Build the full four-layer network from (item, user) -> weight."""
        items = {i for i, _ in edge_weights}
        users = {u for _, u in edge_weights}
        net = cls(items, users)
        for item in net.item_ids:
            net.add_edge(net.source, net.item_node(item), source_weight)
        for item, user in sorted(edge_weights):
            net.add_edge(net.item_node(item), net.user_node(user), edge_weights[(item, user)])
        for user in net.user_ids:
            net.add_edge(net.user_node(user), net.sink, sink_weight)
        return net


def build_network(
    batch: RankedBatch, edge_weights, source_weight: int, sink_weight: int
) -> FlowNetwork:
    """Network over a ranked batch; every recommendation needs a weight."""
    missing = [
        (item, user)
        for user in batch.users
        for item in batch.items_of(user)
        if (item, user) not in edge_weights
    ]
    if missing:
        raise DataError(f"missing edge weights, e.g. {missing[0]}")
    pairs = {
        (item, user): edge_weights[(item, user)]
        for user in batch.users
        for item in batch.items_of(user)
    }
    return FlowNetwork.from_edges(pairs, source_weight, sink_weight)


class Solver:
    """FIFO push-relabel state: labels, excesses, and the active queue.

    Labels never decrease during a run. At termination every node except
    the source and sink has zero excess, and the flow into the sink is
    the maximum flow value.
    """

    def __init__(self, net: FlowNetwork):
        self.net = net
        self.label = [0] * net.n_nodes
        self.excess = [0] * net.n_nodes
        self.queue: deque[int] = deque()
        self._queued = bytearray(net.n_nodes)
        self._current = [0] * net.n_nodes
        self._ops = 0
        # generous polynomial budget; tripping it means a logic bug
        self._budget = max(1000, net.n_nodes * net.n_nodes * max(1, len(net.to) // 2))
        self._label_cap = 2 * net.n_nodes + 1
        self._ran = False

    def preflow(self) -> None:
        """Assign initial labels and saturate every source edge."""
        net = self.net
        self.label[net.source] = net.n_nodes
        for v in range(1, net.n_items + 1):
            self.label[v] = 2
        for v in range(net.n_items + 1, net.n_nodes - 1):
            self.label[v] = 1
        self.label[net.sink] = 0
        for e in net.adj[net.source]:
            if e % 2 == 1:
                continue
            amount = net.cap[e]
            if amount == 0:
                continue
            net.flow[e] += amount
            net.flow[e ^ 1] -= amount
            self.excess[net.source] -= amount
            v = net.to[e]
            self.excess[v] += amount
            if not self._queued[v]:
                self.queue.append(v)
                self._queued[v] = 1

    def push(self, u: int, v: int) -> int:
        """Send min(excess(u), residual(u, v)) along the first open arc."""
        net = self.net
        e = net.edge_index(u, v)
        assert e is not None, f"no residual arc {u} -> {v}"
        assert self.excess[u] > 0, f"push from node {u} without excess"
        assert self.label[u] == self.label[v] + 1, (
            f"push {u} -> {v} violates label condition "
            f"({self.label[u]} vs {self.label[v]})"
        )
        return self._push_edge(u, e)

    def _push_edge(self, u: int, e: int) -> int:
        net = self.net
        v = net.to[e]
        delta = self.excess[u]
        residual = net.cap[e] - net.flow[e]
        if residual < delta:
            delta = residual
        net.flow[e] += delta
        net.flow[e ^ 1] -= delta
        self.excess[u] -= delta
        self.excess[v] += delta
        if (
            v != net.source
            and v != net.sink
            and self.excess[v] > 0
            and not self._queued[v]
        ):
            self.queue.append(v)
            self._queued[v] = 1
        return delta

    def relabel(self, u: int) -> int:
        """Lift u to one above its lowest residual neighbour."""
        net = self.net
        assert self.excess[u] > 0, f"relabel of node {u} without excess"
        lowest = None
        for e in net.adj[u]:
            if net.cap[e] - net.flow[e] > 0:
                lv = self.label[net.to[e]]
                if lowest is None or lv < lowest:
                    lowest = lv
        if lowest is None:
            raise SolverStuckError(f"node {u} has excess but no residual arc")
        assert lowest >= self.label[u], (
            f"relabel of node {u} with an admissible arc still open"
        )
        self.label[u] = lowest + 1
        if self.label[u] > self._label_cap:
            raise SolverStuckError(f"label of node {u} exceeded {self._label_cap}")
        return self.label[u]

    def _discharge(self, u: int) -> None:
        net = self.net
        adj_u = net.adj[u]
        degree = len(adj_u)
        cur = self._current[u]
        label = self.label
        cap = net.cap
        flow = net.flow
        to = net.to
        while self.excess[u] > 0:
            if cur == degree:
                self.relabel(u)
                self._ops += 1
                if self._ops > self._budget:
                    raise SolverStuckError("operation budget exceeded")
                cur = 0
                continue
            e = adj_u[cur]
            if cap[e] - flow[e] > 0 and label[u] == label[to[e]] + 1:
                self._push_edge(u, e)
                self._ops += 1
                if self._ops > self._budget:
                    raise SolverStuckError("operation budget exceeded")
            else:
                cur += 1
        self._current[u] = cur

    def run(self) -> int:
        """Preflow, then FIFO discharge until no active node remains."""
        if self._ran:
            raise SolverStuckError("solver instances are single-use")
        self._ran = True
        self.preflow()
        queue = self.queue
        while queue:
            u = queue.popleft()
            self._queued[u] = 0
            self._discharge(u)
        return self.max_flow_value

    @property
    def max_flow_value(self) -> int:
        return self.excess[self.net.sink]

    def item_labels(self) -> dict[str, int]:
        return {
            item: self.label[self.net.item_node(item)] for item in self.net.item_ids
        }


def solve_max_flow(net: FlowNetwork) -> Solver:
    """Run push-relabel to completion on a fresh network."""
    solver = Solver(net)
    solver.run()
    return solver


def low_capacity_left_nodes(labels, net: FlowNetwork) -> frozenset[str]:
    """Items whose final label reached the source's initial label.

    These are the left nodes that could not route their preflow forward
    and pushed part of it back to the source.
    """
    threshold = net.n_items + net.n_users + 2
    if isinstance(labels, Solver):
        labels = labels.label
    return frozenset(
        item for item in net.item_ids if labels[net.item_node(item)] >= threshold
    )


def dump_network(net: FlowNetwork, labels=None) -> str:
    """Plain-text edge list (from, to, capacity, flow) for diffing."""
    lines = []
    for e in range(0, len(net.to), 2):
        u, v = net.to[e ^ 1], net.to[e]
        lines.append(
            f"{net.node_name(u)}\t{net.node_name(v)}\t{net.cap[e]}\t{net.flow[e]}"
        )
    if labels is not None:
        if isinstance(labels, Solver):
            labels = labels.label
        for v in range(net.n_nodes):
            lines.append(f"label\t{net.node_name(v)}\t{labels[v]}")
    return "\n".join(lines) + "\n"
