"""End-to-end command-line pipeline behaviour."""

import csv
import json
from pathlib import Path

import pytest

from fairflow.cli import main
from fairflow.ingestion import read_ranked_batch

DEMO = Path(__file__).parent.parent / "data" / "demo"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Demo data pushed through ingest -> recommend once for the module."""
    out = tmp_path_factory.mktemp("exp")
    assert run(
        "ingest", "--ratings", DEMO / "ratings.tsv", "--suppliers",
        DEMO / "suppliers.tsv", "--min-user", 5, "--min-item", 1,
        "--train-fraction", "0.8", "--seed", 11, "--out", out,
    ) == 0
    assert run(
        "recommend", "--algo", "userknn", "--k", 10, "--t", 15, "--out", out
    ) == 0
    return out


class TestIngest:
    def test_writes_split_and_stats(self, pipeline_dir):
        stats = json.loads((pipeline_dir / "stats.json").read_text())
        assert stats["users"] > 0 and stats["suppliers"] > 0
        assert stats["seed"] == 11
        assert (pipeline_dir / "train.tsv").exists()
        assert (pipeline_dir / "test.tsv").exists()
        assert (pipeline_dir / "suppliers.tsv").exists()

    def test_missing_ratings_is_usage_error(self, tmp_path):
        assert run("ingest", "--out", tmp_path) == 1

    def test_bad_file_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("only\ttwo\n")
        assert run("ingest", "--ratings", bad, "--out", tmp_path) == 2


class TestRecommend:
    def test_long_lists_have_requested_size(self, pipeline_dir):
        batch = read_ranked_batch(pipeline_dir / "longlists.tsv")
        assert batch.list_size == 15

    def test_rerun_is_byte_identical(self, pipeline_dir, tmp_path):
        first = (pipeline_dir / "longlists.tsv").read_bytes()
        assert run(
            "recommend", "--algo", "userknn", "--k", 10, "--t", 15,
            "--out", pipeline_dir,
        ) == 0
        assert (pipeline_dir / "longlists.tsv").read_bytes() == first

    def test_import_round_trip(self, pipeline_dir, tmp_path):
        out = tmp_path / "imp"
        out.mkdir()
        assert run(
            "recommend", "--algo", "import",
            "--file", pipeline_dir / "longlists.tsv", "--t", 15, "--out", out,
        ) == 0
        assert (out / "longlists.tsv").read_bytes() == (
            (pipeline_dir / "longlists.tsv").read_bytes()
        )

    def test_unknown_algo_is_usage_error(self, pipeline_dir):
        assert run("recommend", "--algo", "magic", "--out", pipeline_dir) == 1


class TestRerank:
    @pytest.mark.parametrize("variant", ["item", "supplier", "random", "reverse", "none"])
    def test_variants_emit_size_n(self, pipeline_dir, variant):
        assert run(
            "rerank", "--variant", variant, "--lambda", "0.5", "--beta", "1.0",
            "--n", 5, "--seed", 3, "--out", pipeline_dir,
        ) == 0
        batch = read_ranked_batch(pipeline_dir / "final.tsv", require_sorted_scores=False)
        assert batch.list_size == 5
        if variant in ("item", "supplier"):
            stats = json.loads((pipeline_dir / "iterstats.json").read_text())
            assert all(
                {"iteration", "items_remaining", "pairs_remaining", "candidates_found"}
                <= set(s) for s in stats
            )

    def test_none_variant_equals_truncation(self, pipeline_dir):
        long_batch = read_ranked_batch(pipeline_dir / "longlists.tsv")
        assert run("rerank", "--variant", "none", "--n", 5, "--out", pipeline_dir) == 0
        final = read_ranked_batch(pipeline_dir / "final.tsv", require_sorted_scores=False)
        for user in final.users:
            assert final.items_of(user) == long_batch.items_of(user)[:5]

    def test_matches_library_run(self, pipeline_dir):
        from fairflow.core import ExperimentConfig
        from fairflow.ingestion import parse_supplier_map
        from fairflow.rerank import flow_rerank

        assert run(
            "rerank", "--variant", "item", "--lambda", "0.5", "--beta", "1.0",
            "--n", 5, "--out", pipeline_dir,
        ) == 0
        via_cli = read_ranked_batch(pipeline_dir / "final.tsv", require_sorted_scores=False)
        long_batch = read_ranked_batch(pipeline_dir / "longlists.tsv")
        cfg = ExperimentConfig(
            t=long_batch.list_size, n=5, lambda_=0.5, beta=1.0, variant="item"
        )
        assert flow_rerank(long_batch, None, cfg).final == via_cli

    def test_config_file_precedence(self, pipeline_dir, tmp_path):
        cfg = tmp_path / "run.conf"
        cfg.write_text("variant = reverse\nn = 4\n")
        assert run("rerank", "--config", cfg, "--out", pipeline_dir) == 0
        assert read_ranked_batch(pipeline_dir / "final.tsv", require_sorted_scores=False).list_size == 4
        # flag beats the file
        assert run("rerank", "--config", cfg, "--n", 6, "--out", pipeline_dir) == 0
        assert read_ranked_batch(pipeline_dir / "final.tsv", require_sorted_scores=False).list_size == 6


class TestEvaluate:
    def test_report_files_and_columns(self, pipeline_dir):
        assert run("rerank", "--variant", "item", "--n", 5, "--out", pipeline_dir) == 0
        assert run("evaluate", "--groups", "--out", pipeline_dir) == 0
        with open(pipeline_dir / "report.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["P", "1-IA", "5-IA", "LT", "1-SA", "5-SA", "IG", "IE", "SG", "SE"]
        assert len(rows) == 2
        report = json.loads((pipeline_dir / "report.json").read_text())
        assert set(rows[0]) <= set(report)
        assert (pipeline_dir / "groups.csv").exists()
        assert (pipeline_dir / "groups.png").exists()

    def test_self_groups_are_zero(self, pipeline_dir):
        assert run("rerank", "--variant", "none", "--n", 5, "--out", pipeline_dir) == 0
        assert run(
            "evaluate", "--groups", "--no-figures", "--out", pipeline_dir
        ) == 0
        with open(pipeline_dir / "groups.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        for _, ivs, svs in rows:
            assert ivs in ("NA", "0.0")
            assert svs in ("NA", "0.0")

    def test_mcnemar_between_two_batches(self, pipeline_dir, tmp_path):
        assert run("rerank", "--variant", "none", "--n", 5, "--out", pipeline_dir) == 0
        base_copy = tmp_path / "base.tsv"
        base_copy.write_bytes((pipeline_dir / "final.tsv").read_bytes())
        assert run("rerank", "--variant", "reverse", "--n", 5, "--out", pipeline_dir) == 0
        assert run(
            "evaluate", "--mcnemar", base_copy, "--no-figures", "--out", pipeline_dir
        ) == 0
        report = json.loads((pipeline_dir / "report.json").read_text())
        assert "mcnemar_statistic" in report

    def test_supplier_variant_needs_catalog(self, tmp_path):
        out = tmp_path / "nocat"
        out.mkdir()
        assert run(
            "ingest", "--ratings", DEMO / "ratings.tsv", "--out", out,
            "--min-user", 5,
        ) == 0
        assert run("recommend", "--algo", "mostpop", "--t", 12, "--out", out) == 0
        assert run("rerank", "--variant", "supplier", "--n", 4, "--out", out) == 1


class TestSweep:
    def test_grid_rows_and_determinism(self, pipeline_dir):
        args = (
            "sweep", "--variant", "item,reverse", "--lambda", "0,0.5,1",
            "--beta", "1.0", "--n", 5, "--no-figures", "--out", pipeline_dir,
        )
        assert run(*args) == 0
        first = (pipeline_dir / "sweep.csv").read_bytes()
        with open(pipeline_dir / "sweep.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:3] == ["variant", "lambda", "beta"]
        assert len(rows) == 1 + 3 + 1  # header, three lambdas, one reverse
        assert run(*args) == 0
        assert (pipeline_dir / "sweep.csv").read_bytes() == first

    def test_figures_rendered_when_enabled(self, pipeline_dir):
        assert run(
            "sweep", "--variant", "item", "--lambda", "0,1", "--n", 5,
            "--out", pipeline_dir,
        ) == 0
        assert list(pipeline_dir.glob("tradeoff_*.png"))

    def test_failed_cells_are_recorded_and_exit_nonzero(self, tmp_path):
        out = tmp_path / "partial"
        out.mkdir()
        assert run(
            "ingest", "--ratings", DEMO / "ratings.tsv", "--out", out,
            "--min-user", 5,
        ) == 0
        assert run("recommend", "--algo", "mostpop", "--t", 12, "--out", out) == 0
        # supplier cells fail (no catalog), the item cell still succeeds
        code = run(
            "sweep", "--variant", "item,supplier", "--lambda", "0.5",
            "--n", 4, "--no-figures", "--out", out,
        )
        assert code != 0
        with open(out / "sweep.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3
        flat = "\n".join(",".join(r) for r in rows)
        assert "ERROR" in flat


class TestCompositionLaw:
    def test_rerank_none_then_evaluate_matches_library(self, pipeline_dir):
        from fairflow.core import truncate
        from fairflow.ingestion import parse_ratings, parse_supplier_map
        from fairflow.metrics import evaluate_batch

        assert run("rerank", "--variant", "none", "--n", 5, "--out", pipeline_dir) == 0
        assert run("evaluate", "--no-figures", "--out", pipeline_dir) == 0
        via_cli = json.loads((pipeline_dir / "report.json").read_text())

        long_batch = read_ranked_batch(pipeline_dir / "longlists.tsv")
        train = parse_ratings(pipeline_dir / "train.tsv")
        test = parse_ratings(pipeline_dir / "test.tsv")
        catalog = parse_supplier_map(pipeline_dir / "suppliers.tsv").restrict(
            set(train.items)
        )
        direct = evaluate_batch(truncate(long_batch, 5), test, train, catalog).to_dict()
        for key in ("P", "1-IA", "5-IA", "LT", "1-SA", "5-SA", "IG", "IE", "SG", "SE"):
            assert via_cli[key] == pytest.approx(direct[key], abs=1e-12)
