"""Parsing, preprocessing, and split behaviour."""

import math

import numpy as np
import pytest

from fairflow.core import InteractionDataset, RankedBatch
from fairflow.errors import DataError, ParseError, UsageError
from fairflow.ingestion import (
    apply_core_filter,
    interactions_to_ratings,
    parse_ratings,
    parse_supplier_map,
    read_ranked_batch,
    split_train_test,
    write_ranked_batch,
    write_ratings,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestParseRatings:
    def test_three_rows(self, tmp_path):
        path = write(tmp_path, "r.tsv", "u1\ta\t5\nu1\tb\t3\nu2\ta\t4\n")
        ds = parse_ratings(path)
        assert len(ds) == 3

    def test_duplicate_keeps_last(self, tmp_path):
        path = write(tmp_path, "r.tsv", "u1\ta\t5\nu1\ta\t2\n")
        ds = parse_ratings(path)
        assert len(ds) == 1
        assert ds.profile("u1")["a"] == 2.0

    def test_csv_with_timestamp_and_comments(self, tmp_path):
        path = write(tmp_path, "r.csv", "# header comment\nu1,a,5,123456\n")
        ds = parse_ratings(path, "csv")
        assert ds.profile("u1") == {"a": 5.0}

    def test_malformed_row_reports_line(self, tmp_path):
        path = write(tmp_path, "r.tsv", "u1\ta\t5\nu2\tb\n")
        with pytest.raises(ParseError) as err:
            parse_ratings(path)
        assert err.value.line_no == 2

    def test_empty_file_rejected(self, tmp_path):
        path = write(tmp_path, "r.tsv", "# nothing here\n")
        with pytest.raises(DataError):
            parse_ratings(path)

    def test_round_trip(self, tmp_path):
        ds = InteractionDataset([("u1", "a", 5), ("u2", "b", 2.5)])
        path = tmp_path / "out.tsv"
        write_ratings(ds, path)
        assert parse_ratings(path) == ds


class TestInteractionsToRatings:
    def test_monotone_in_counts(self):
        ds = InteractionDataset([("u", "i1", 1), ("u", "i2", 10)])
        out = interactions_to_ratings(ds)
        assert out.profile("u")["i2"] >= out.profile("u")["i1"]

    def test_uniform_counts_all_map_to_five(self):
        ds = InteractionDataset([("u", "a", 4), ("u", "b", 4), ("u", "c", 4)])
        out = interactions_to_ratings(ds)
        assert set(out.profile("u").values()) == {5.0}

    def test_five_distinct_counts_hit_every_level(self):
        # oracle: quantile of count c is (#counts <= c)/m over the sorted
        # vector [1,2,3,4,5], so ratings are ceil(5 * k/5) = 1..5
        ds = InteractionDataset([("u", f"i{c}", c) for c in (1, 2, 3, 4, 5)])
        out = interactions_to_ratings(ds)
        got = [out.profile("u")[f"i{c}"] for c in (1, 2, 3, 4, 5)]
        assert got == [1.0, 2.0, 3.0, 4.0, 5.0]

    def test_quantile_oracle_on_random_profiles(self):
        rng = np.random.default_rng(0)
        counts = rng.integers(1, 30, size=40)
        ds = InteractionDataset([("u", f"i{k}", int(c)) for k, c in enumerate(counts)])
        out = interactions_to_ratings(ds)
        ordered = sorted(counts)
        for k, c in enumerate(counts):
            frac = sum(1 for x in ordered if x <= c) / len(ordered)
            assert out.profile("u")[f"i{k}"] == float(math.ceil(5 * frac))

    def test_non_positive_count_rejected(self):
        ds = InteractionDataset([("u", "a", 0)])
        with pytest.raises(DataError):
            interactions_to_ratings(ds)


class TestApplyCoreFilter:
    def test_zero_thresholds_are_identity(self):
        ds = InteractionDataset([("u1", "a", 1), ("u2", "b", 2)])
        assert apply_core_filter(ds, 0, 0) == ds

    def test_user_threshold_matches_brute_force(self):
        rng = np.random.default_rng(1)
        triples = []
        for u in range(10):
            for k in range(int(rng.integers(1, 7))):
                triples.append((f"u{u}", f"i{u}_{k}", 1.0))
        ds = InteractionDataset(triples)
        out = apply_core_filter(ds, min_user_ratings=3)
        per_user = {}
        for user, _, _ in triples:
            per_user[user] = per_user.get(user, 0) + 1
        expected = {u for u, c in per_user.items() if c >= 3}
        assert set(out.users) == expected

    def test_sampling_is_deterministic_and_sized(self):
        ds = InteractionDataset([(f"u{k}", "a", 1) for k in range(20)])
        out1 = apply_core_filter(ds, sample_users=5, seed=9)
        out2 = apply_core_filter(ds, sample_users=5, seed=9)
        assert out1 == out2
        assert len(out1.users) == 5

    def test_oversampling_rejected(self):
        ds = InteractionDataset([("u1", "a", 1)])
        with pytest.raises(UsageError):
            apply_core_filter(ds, sample_users=2)

    def test_item_pass_runs_after_user_pass(self):
        # u1 keeps a single rating after the item pass: one-shot filtering
        # may leave the user threshold re-violated, by design
        ds = InteractionDataset(
            [("u1", "rare", 1), ("u1", "pop", 1),
             ("u2", "pop", 1), ("u2", "pop2", 1),
             ("u3", "pop", 1), ("u3", "pop2", 1)]
        )
        out = apply_core_filter(ds, min_user_ratings=2, min_item_ratings=2)
        assert "rare" not in out.items
        assert out.profile("u1") == {"pop": 1.0}
        iterated = apply_core_filter(
            ds, min_user_ratings=2, min_item_ratings=2, iterate=True
        )
        assert "u1" not in iterated.users


class TestSplitTrainTest:
    def test_exact_division(self):
        ds = InteractionDataset([("u", f"i{k}", 1) for k in range(10)])
        train, test = split_train_test(ds, 0.8, seed=3)
        assert len(train) == 8 and len(test) == 2

    def test_sizes_match_sum_of_per_user_floors(self):
        rng = np.random.default_rng(2)
        triples = []
        for u in range(30):
            for k in range(int(rng.integers(2, 12))):
                triples.append((f"u{u}", f"i{u}_{k}", 1.0))
        ds = InteractionDataset(triples)
        train, _ = split_train_test(ds, 0.8, seed=0)
        per_user = {}
        for user, _, _ in triples:
            per_user[user] = per_user.get(user, 0) + 1
        assert len(train) == sum(int(math.floor(0.8 * c)) for c in per_user.values())

    def test_disjoint_union_per_user(self):
        ds = InteractionDataset([("u", f"i{k}", 1) for k in range(7)])
        train, test = split_train_test(ds, 0.6, seed=5)
        train_items = train.items_of("u")
        test_items = test.items_of("u")
        assert train_items & test_items == frozenset()
        assert train_items | test_items == ds.items_of("u")

    def test_deterministic_under_seed(self):
        ds = InteractionDataset([("u", f"i{k}", 1) for k in range(9)])
        a = split_train_test(ds, 0.8, seed=7)
        b = split_train_test(ds, 0.8, seed=7)
        assert a[0] == b[0] and a[1] == b[1]

    def test_tiny_profile_goes_to_train(self):
        ds = InteractionDataset([("solo", "a", 1), ("u", "a", 1), ("u", "b", 1)])
        with pytest.warns(UserWarning):
            train, test = split_train_test(ds, 0.8, seed=0)
        assert train.profile("solo") == {"a": 1.0}
        assert "solo" not in test.users


class TestParseSupplierMap:
    def test_small_map(self, tmp_path):
        path = write(tmp_path, "s.tsv", "x\tS1\ny\tS1\n")
        cat = parse_supplier_map(path)
        assert len(cat.suppliers) == 1
        assert len(cat) == 2

    def test_conflict_rejected(self, tmp_path):
        path = write(tmp_path, "s.tsv", "x\tS1\nx\tS2\n")
        with pytest.raises(DataError):
            parse_supplier_map(path)

    def test_missing_supplier_lists_offenders(self, tmp_path):
        path = write(tmp_path, "s.tsv", "a\tS1\n")
        ds = InteractionDataset([("u", "a", 1), ("u", "b", 1)])
        with pytest.raises(DataError, match="b"):
            parse_supplier_map(path, dataset=ds)

    def test_restricted_to_dataset_items(self, tmp_path):
        path = write(tmp_path, "s.tsv", "a\tS1\nb\tS2\nextra\tS3\n")
        ds = InteractionDataset([("u", "a", 1), ("u", "b", 1)])
        cat = parse_supplier_map(path, dataset=ds)
        assert cat.items == ("a", "b")
        assert cat.suppliers == ("S1", "S2")


class TestRankedBatchIO:
    def test_round_trip(self, tmp_path):
        batch = RankedBatch.from_scores(
            {"u1": [("a", 0.9), ("b", 0.8)], "u2": [("c", 0.7), ("a", 0.2)]}, 2
        )
        path = tmp_path / "batch.tsv"
        write_ranked_batch(batch, path)
        assert read_ranked_batch(path, 2) == batch

    def test_rank_gap_rejected(self, tmp_path):
        path = write(
            tmp_path, "b.tsv",
            "u\ta\t0.9\t1\nu\tb\t0.8\t2\nu\tc\t0.6\t4\n",
        )
        with pytest.raises(DataError):
            read_ranked_batch(path, 3)

    def test_score_rank_contradiction_rejected(self, tmp_path):
        path = write(tmp_path, "b.tsv", "u\ta\t0.5\t1\nu\tb\t0.9\t2\n")
        with pytest.raises(DataError):
            read_ranked_batch(path, 2)

    def test_valid_two_user_file(self, tmp_path):
        path = write(
            tmp_path, "b.tsv",
            "u1\ta\t0.9\t1\nu1\tb\t0.8\t2\nu2\tc\t0.6\t1\nu2\td\t0.5\t2\n",
        )
        batch = read_ranked_batch(path, 2)
        assert len(batch) == 2
