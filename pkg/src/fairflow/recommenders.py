"""Baseline recommenders that produce the long top-t lists.

The neighbourhood model scores an unseen item as the similarity-weighted
average of the neighbours' raw ratings (no mean-centering); similarity is
computed over co-rated items only, and neighbours with non-positive
similarity are discarded. Users who cannot fill a list of t scoreable
items are padded from the popularity ranking over their unseen items.
"""

from __future__ import annotations

import numpy as np

from .core import InteractionDataset, RankedBatch, warn_short_list
from .errors import DataError, UsageError


class NeighborModel:
    """Per-user top-k neighbourhoods over a fixed training user order."""

    __slots__ = ("user_ids", "k", "metric", "_idx", "_sim")

    def __init__(self, user_ids, k, metric, neighbor_idx, neighbor_sim):
        self.user_ids = tuple(user_ids)
        self.k = k
        self.metric = metric
        self._idx = neighbor_idx
        self._sim = neighbor_sim

    def neighbors_of(self, user: str) -> tuple[tuple[str, float], ...]:
        u = self.user_ids.index(user)
        return tuple(
            (self.user_ids[v], float(s)) for v, s in zip(self._idx[u], self._sim[u])
        )


def _rating_matrix(train: InteractionDataset):
    users = sorted(train.user_index)
    items = sorted(train.item_index)
    R = np.zeros((len(users), len(items)), dtype=np.float64)
    u_of = train.user_index
    i_of = train.item_index
    for user, item, value in train.interactions:
        R[u_of[user], i_of[item]] = value
    return users, items, R


def _pairwise_similarity(R: np.ndarray, metric: str) -> np.ndarray:
    """Similarity over co-rated items for every user pair."""
    B = (R > 0).astype(np.float64)
    if metric == "cosine":
        V = R
    elif metric == "pearson":
        counts = B.sum(axis=1)
        means = np.divide(R.sum(axis=1), counts, out=np.zeros_like(counts), where=counts > 0)
        V = (R - means[:, None]) * B
    else:
        raise UsageError(f"unknown similarity {metric!r}")
    num = V @ V.T
    sq = (V * V) @ B.T  # co-rated squared norms, one per ordered pair
    den = np.sqrt(sq * sq.T)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(den > 0, num / den, 0.0)
    np.fill_diagonal(sim, 0.0)
    return np.clip(sim, -1.0, 1.0)


def train_user_knn(
    train: InteractionDataset, k: int, similarity: str = "cosine"
) -> NeighborModel:
    """Fit per-user top-k neighbour lists; ties break by user id."""
    if k < 1:
        raise UsageError(f"k must be at least 1, got {k}")
    if len(train) == 0:
        raise DataError("empty training set")
    users, _, R = _rating_matrix(train)
    sim = _pairwise_similarity(R, similarity)
    neighbor_idx, neighbor_sim = [], []
    for u in range(len(users)):
        row = sim[u]
        order = np.argsort(-row, kind="stable")  # stable: id order on ties
        chosen = [v for v in order if v != u and row[v] > 0.0][:k]
        neighbor_idx.append(np.asarray(chosen, dtype=np.int64))
        neighbor_sim.append(row[chosen] if chosen else np.empty(0))
    return NeighborModel(users, k, similarity, neighbor_idx, neighbor_sim)


def _popularity_order(train: InteractionDataset):
    counts: dict[str, int] = {}
    for _, item, _ in train.interactions:
        counts[item] = counts.get(item, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked


def most_popular(train: InteractionDataset, t: int, users=None) -> RankedBatch:
    """Top-t unseen items per user by training rating count."""
    ranked = _popularity_order(train)
    if users is None:
        users = sorted(train.user_index)
    lists = {}
    short = False
    for user in users:
        seen = train.items_of(user)
        picks = [(i, float(c)) for i, c in ranked if i not in seen][:t]
        if len(picks) < t:
            warn_short_list(user, len(picks), t)
            short = True
        lists[user] = picks
    return RankedBatch(lists, t, strict=not short)


def recommend_top_t(model: NeighborModel, train: InteractionDataset, t: int) -> RankedBatch:
    """Score every unseen item per user and keep the top t.

    score(u, i) = sum over v in N(u) of sim(u, v) * r(v, i), divided by
    the user's total neighbourhood similarity; r(v, i) is zero where v
    did not rate i. Items no neighbour rated at all are unscoreable and
    are filled in from the popularity ranking, with synthetic scores
    placed strictly below the user's lowest model score.
    """
    users, items, R = _rating_matrix(train)
    if tuple(users) != model.user_ids:
        raise DataError("model was trained on a different user set")
    n_users, n_items = R.shape
    B = (R > 0).astype(np.float64)
    W = np.zeros((n_users, n_users), dtype=np.float64)
    for u in range(n_users):
        W[u, model._idx[u]] = model._sim[u]
    num = W @ R
    rated = W @ B  # evidence mass: which items any neighbour rated
    total_sim = np.abs(W).sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where((rated > 0) & (total_sim > 0), num / total_sim, np.nan)
    pop_idx = np.asarray(
        [train.item_index[i] for i, _ in _popularity_order(train)], dtype=np.int64
    )
    lists = {}
    short = False
    for u, user in enumerate(users):
        row = scores[u]
        valid = ~np.isnan(row) & (B[u] == 0)
        idx = np.nonzero(valid)[0]
        order = np.lexsort((idx, -row[idx]))  # score descending, id on ties
        top = idx[order[:t]]
        picks = [(items[j], float(row[j])) for j in top]
        if len(picks) < t:
            have = set(top)
            base = picks[-1][1] if picks else 0.0
            fill = 0
            for j in pop_idx:
                if len(picks) >= t:
                    break
                if B[u, j] == 0 and j not in have:
                    fill += 1
                    picks.append((items[j], base - float(fill)))
        if len(picks) < t:
            warn_short_list(user, len(picks), t)
            short = True
        lists[user] = picks
    return RankedBatch(lists, t, strict=not short)
