"""Extreme re-rankers: suffix reversal and uniform subsampling."""

import pytest

from fairflow.baselines import random_rerank, reverse_rerank
from fairflow.core import RankedBatch
from fairflow.errors import UsageError


def batch_of(lists, t):
    return RankedBatch(
        {
            u: [(i, float(len(items) - k)) for k, i in enumerate(items)]
            for u, items in lists.items()
        },
        t,
    )


class TestReverse:
    def test_suffix_in_ascending_relevance(self):
        batch = batch_of({"u": ["a", "b", "c", "d", "e"]}, 5)
        assert reverse_rerank(batch, 2).items_of("u") == ("e", "d")

    def test_full_reversal_at_n_equals_t(self):
        batch = batch_of({"u": ["a", "b", "c"]}, 3)
        assert reverse_rerank(batch, 3).items_of("u") == ("c", "b", "a")

    def test_oversize_rejected(self):
        batch = batch_of({"u": ["a", "b"]}, 2)
        with pytest.raises(UsageError):
            reverse_rerank(batch, 3)

    def test_only_emits_long_list_items(self):
        batch = batch_of({"u1": ["a", "b", "c"], "u2": ["d", "e", "f"]}, 3)
        out = reverse_rerank(batch, 2)
        for user in out.users:
            assert set(out.items_of(user)) <= set(batch.items_of(user))


class TestRandom:
    def test_full_subset_keeps_every_item(self):
        batch = batch_of({"u": ["a", "b", "c"]}, 3)
        out = random_rerank(batch, 3, seed=1)
        assert set(out.items_of("u")) == {"a", "b", "c"}

    def test_same_seed_reproduces(self):
        batch = batch_of({"u1": list("abcde"), "u2": list("fghij")}, 5)
        assert random_rerank(batch, 2, seed=9) == random_rerank(batch, 2, seed=9)

    def test_output_preserves_score_order(self):
        batch = batch_of({"u": list("abcdefgh")}, 8)
        out = random_rerank(batch, 4, seed=3)
        scores = [s for _, s in out.list_of("u")]
        assert scores == sorted(scores, reverse=True)

    def test_inclusion_frequency_matches_hypergeometric(self):
        # n/t = 2/5 inclusion probability for every item of the list
        batch = batch_of({"u": list("abcde")}, 5)
        hits = {i: 0 for i in "abcde"}
        draws = 10_000
        for seed in range(draws):
            for item in random_rerank(batch, 2, seed=seed).items_of("u"):
                hits[item] += 1
        for item, count in hits.items():
            assert count / draws == pytest.approx(0.4, abs=0.02)
