"""Command-line pipeline: ingest, recommend, rerank, evaluate, sweep.

Commands communicate through files in the experiment directory given by
--out: ingest writes train.tsv/test.tsv/suppliers.tsv/stats.json, the
recommend step writes longlists.tsv, rerank writes final.tsv (plus
iterstats.json for the flow variants), evaluate writes report.json and
report.csv, and sweep fills sweep/ and sweep.csv. Flag values override
a key=value --config file, which overrides the built-in defaults. Exit
codes: 0 ok, 1 usage, 2 bad data, 3 internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import baselines, ingestion, plotting
from .core import ExperimentConfig, truncate
from .errors import DataError, FairflowError, UsageError
from .metrics import CSV_COLUMNS, evaluate_batch
from .recommenders import most_popular, recommend_top_t, train_user_knn
from .rerank import flow_rerank

DEFAULTS = {
    "format": "tsv",
    "min_user": 0,
    "min_item": 0,
    "train_fraction": 0.8,
    "seed": 0,
    "algo": "userknn",
    "k": 50,
    "similarity": "cosine",
    "t": 50,
    "n": 10,
    "variant": "item",
    "lambda": "0.5",
    "beta": "1.0",
}

_CASTS = {
    "min_user": int,
    "min_item": int,
    "sample_users": int,
    "seed": int,
    "k": int,
    "t": int,
    "n": int,
    "train_fraction": float,
}

FLOW_VARIANTS = ("item", "supplier")
ALL_VARIANTS = FLOW_VARIANTS + ("random", "reverse", "none")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_config(path) -> dict:
    """TOML-like key=value lines; '#' starts a comment."""
    out = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _opt(args, config, key, default=None, attr=None):
    """Flag > config file > default, with per-key casting."""
    cli = getattr(args, attr or key, None)
    if cli is not None:
        return cli
    if key in config:
        raw = config[key]
        return _CASTS.get(key, str)(raw)
    raw = DEFAULTS.get(key, default)
    if raw is None:
        return None
    return _CASTS.get(key, str)(raw) if isinstance(raw, str) and key in _CASTS else raw


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    return _read_config(path) if path else {}


def _outdir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(path: Path, hint: str) -> Path:
    if not path.exists():
        raise UsageError(f"missing {path} ({hint})")
    return path


# ---------------------------------------------------------------- ingest


def cmd_ingest(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    fmt = _opt(args, config, "format")
    seed = _opt(args, config, "seed")
    if not args.ratings:
        raise UsageError("--ratings is required")
    ds = ingestion.parse_ratings(args.ratings, fmt)
    if args.interactions:
        ds = ingestion.interactions_to_ratings(ds)
    ds = ingestion.apply_core_filter(
        ds,
        min_user_ratings=_opt(args, config, "min_user"),
        min_item_ratings=_opt(args, config, "min_item"),
        sample_users=_opt(args, config, "sample_users"),
        seed=seed,
        iterate=args.iterate_filter,
    )
    catalog = None
    if args.suppliers:
        catalog = ingestion.parse_supplier_map(args.suppliers, fmt, dataset=ds)
        ingestion.write_supplier_map(catalog, out / "suppliers.tsv")
    train, test = ingestion.split_train_test(
        ds, _opt(args, config, "train_fraction"), seed=seed
    )
    ingestion.write_ratings(train, out / "train.tsv")
    ingestion.write_ratings(test, out / "test.tsv")
    stats = ingestion.dataset_stats(ds, catalog)
    stats.update(
        {
            "train_interactions": len(train),
            "test_interactions": len(test),
            "seed": seed,
        }
    )
    (out / "stats.json").write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    print(
        f"ingested {stats['users']} users, {stats['items']} items, "
        f"{stats['interactions']} interactions"
        + (f", {stats['suppliers']} suppliers" if catalog else "")
    )
    return 0


# ------------------------------------------------------------- recommend


def cmd_recommend(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    algo = _opt(args, config, "algo")
    t = _opt(args, config, "t")
    if algo == "import":
        if not args.file:
            raise UsageError("--algo import needs --file")
        batch = ingestion.read_ranked_batch(args.file, t)
    else:
        train = ingestion.parse_ratings(_need(out / "train.tsv", "run ingest first"))
        if algo == "userknn":
            model = train_user_knn(
                train, _opt(args, config, "k"), _opt(args, config, "similarity")
            )
            batch = recommend_top_t(model, train, t)
        elif algo == "mostpop":
            batch = most_popular(train, t)
        else:
            raise UsageError(f"unknown recommender {algo!r}")
    ingestion.write_ranked_batch(batch, out / "longlists.tsv")
    print(f"wrote lists of size {batch.list_size} for {len(batch)} users")
    return 0


# ---------------------------------------------------------------- rerank


def _load_catalog(out: Path):
    path = _need(out / "suppliers.tsv", "ingest with --suppliers")
    return ingestion.parse_supplier_map(path)


def _apply_variant(long_lists, variant, lam, beta, n, seed, catalog):
    """Shared by rerank and sweep cells; returns (final batch, stats or None)."""
    if variant in FLOW_VARIANTS:
        cfg = ExperimentConfig(
            t=long_lists.list_size, n=n, lambda_=lam, beta=beta,
            variant=variant, seed=seed,
        )
        result = flow_rerank(long_lists, catalog, cfg)
        return result.final, list(result.stats)
    if variant == "random":
        return baselines.random_rerank(long_lists, n, seed), None
    if variant == "reverse":
        return baselines.reverse_rerank(long_lists, n), None
    if variant == "none":
        return truncate(long_lists, n), None
    raise UsageError(f"unknown variant {variant!r}")


def cmd_rerank(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    variant = _opt(args, config, "variant")
    if variant not in ALL_VARIANTS:
        raise UsageError(f"variant must be one of {', '.join(ALL_VARIANTS)}")
    n = _opt(args, config, "n")
    seed = _opt(args, config, "seed")
    lam = float(_opt(args, config, "lambda", attr="lambda_"))
    beta = float(_opt(args, config, "beta"))
    long_lists = ingestion.read_ranked_batch(
        _need(out / "longlists.tsv", "run recommend first"), None
    )
    catalog = _load_catalog(out) if variant == "supplier" else None
    final, stats = _apply_variant(long_lists, variant, lam, beta, n, seed, catalog)
    ingestion.write_ranked_batch(final, out / "final.tsv")
    if stats is not None:
        (out / "iterstats.json").write_text(
            json.dumps(stats, indent=2) + "\n", encoding="utf-8"
        )
    (out / "rerank_config.json").write_text(
        json.dumps(
            {"variant": variant, "lambda": lam, "beta": beta, "n": n, "seed": seed},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote final lists of size {final.list_size} ({variant})")
    return 0


# -------------------------------------------------------------- evaluate


def _evaluation_inputs(out: Path):
    train = ingestion.parse_ratings(_need(out / "train.tsv", "run ingest first"))
    test = ingestion.parse_ratings(_need(out / "test.tsv", "run ingest first"))
    catalog = _load_catalog(out)
    return train, test, catalog


def _restricted_catalog(catalog, train, batch):
    universe = set(train.items) | set(batch.all_items())
    missing = sorted(universe - set(catalog.items))
    if missing:
        raise DataError(f"items without a supplier in the catalog: {missing[:10]}")
    return catalog.restrict(universe)


def _check_users(batch, train):
    unknown = sorted(set(batch.users) - set(train.users))
    if unknown:
        raise DataError(f"batch contains users absent from the split: {unknown[:10]}")


def _write_report(report, out: Path, stem: str):
    data = report.to_dict()
    (out / f"{stem}.json").write_text(
        json.dumps(data, indent=2) + "\n", encoding="utf-8"
    )
    with open(out / f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        writer.writerow(report.csv_row())


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    batch_path = Path(args.batch) if args.batch else _need(
        out / "final.tsv", "run rerank first"
    )
    final = ingestion.read_ranked_batch(batch_path, None, require_sorted_scores=False)
    train, test, full_catalog = _evaluation_inputs(out)
    _check_users(final, train)
    catalog = _restricted_catalog(full_catalog, train, final)
    base = long_lists = None
    if args.groups:
        long_lists = ingestion.read_ranked_batch(
            _need(out / "longlists.tsv", "needed for --groups"), None
        )
        base = truncate(long_lists, final.list_size)
    other = None
    if args.mcnemar:
        other = ingestion.read_ranked_batch(
            Path(args.mcnemar), None, require_sorted_scores=False
        )
    report = evaluate_batch(
        final, test, train, catalog,
        base=base, long_lists=long_lists, mcnemar_against=other,
    )
    _write_report(report, out, "report")
    if args.groups:
        with open(out / "groups.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "IVS", "SVS"])
            for g in range(10):
                writer.writerow(
                    [
                        f"G{g + 1}",
                        _cell(report.item_shifts[g]),
                        _cell(report.supplier_shifts[g]),
                    ]
                )
        if args.figures:
            plotting.render_group_shifts(
                report.item_shifts, report.supplier_shifts, out / "groups.png"
            )
    print("P = {:.6f}".format(report.precision))
    return 0


def _cell(value):
    return "NA" if value is None else repr(float(value))


# ----------------------------------------------------------------- sweep


def _sweep_cell(payload: dict) -> dict:
    """One (variant, lambda, beta) cell; isolated so cells can run in
    worker processes."""
    out = Path(payload["out"])
    try:
        long_lists = ingestion.read_ranked_batch(out / "longlists.tsv", None)
        train, test, full_catalog = _evaluation_inputs(out)
        catalog = full_catalog if payload["variant"] == "supplier" else None
        final, _ = _apply_variant(
            long_lists,
            payload["variant"],
            payload["lam"],
            payload["beta"],
            payload["n"],
            payload["seed"],
            catalog,
        )
        _check_users(final, train)
        cell_path = out / "sweep" / payload["name"]
        ingestion.write_ranked_batch(final, cell_path)
        report = evaluate_batch(
            final, test, train, _restricted_catalog(full_catalog, train, final)
        )
        row = {"variant": payload["variant"], "lambda": payload["lam"], "beta": payload["beta"]}
        row.update(report.to_dict())
        return row
    except Exception as exc:  # recorded per cell, surfaced by the driver
        return {
            "variant": payload["variant"],
            "lambda": payload["lam"],
            "beta": payload["beta"],
            "error": f"{type(exc).__name__}: {exc}",
        }


def cmd_sweep(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    _need(out / "longlists.tsv", "run recommend first")
    n = _opt(args, config, "n")
    seed = _opt(args, config, "seed")
    variants = [v.strip() for v in str(_opt(args, config, "variant")).split(",")]
    lambdas = [
        float(x) for x in str(_opt(args, config, "lambda", attr="lambda_")).split(",")
    ]
    betas = [float(x) for x in str(_opt(args, config, "beta")).split(",")]
    for v in variants:
        if v not in ALL_VARIANTS:
            raise UsageError(f"variant must be one of {', '.join(ALL_VARIANTS)}")
    (out / "sweep").mkdir(exist_ok=True)
    cells = []
    for variant in variants:
        if variant in FLOW_VARIANTS:
            for lam in lambdas:
                for beta in betas:
                    name = f"final_{variant}_lam{lam:g}_beta{beta:g}.tsv"
                    cells.append(
                        {"variant": variant, "lam": lam, "beta": beta,
                         "n": n, "seed": seed, "out": str(out), "name": name}
                    )
        else:
            cells.append(
                {"variant": variant, "lam": None, "beta": None,
                 "n": n, "seed": seed, "out": str(out),
                 "name": f"final_{variant}.tsv"}
            )
    workers = int(os.environ.get("FAIRFLOW_WORKERS", "0")) or min(
        len(cells), os.cpu_count() or 1
    )
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    rows.sort(
        key=lambda r: (
            r["variant"],
            r["lambda"] if r["lambda"] is not None else -1.0,
            r["beta"] if r["beta"] is not None else -1.0,
        )
    )
    failures = [r for r in rows if "error" in r]
    good = [r for r in rows if "error" not in r]
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "lambda", "beta", *CSV_COLUMNS])
        for row in rows:
            head = [row["variant"], _cell(row["lambda"]), _cell(row["beta"])]
            if "error" in row:
                writer.writerow(head + [f"ERROR: {row['error']}"])
            else:
                writer.writerow(head + [_cell(row.get(c)) for c in CSV_COLUMNS])
    if args.figures and good:
        plotting.render_sweep_charts(good, out)
    print(f"swept {len(cells)} cells, {len(failures)} failed")
    for row in failures:
        print(
            f"  {row['variant']} lambda={row['lambda']} beta={row['beta']}: {row['error']}",
            file=sys.stderr,
        )
    return 2 if failures else 0


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="experiment directory")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("ingest", help="parse, filter and split a ratings file")
    common(p)
    p.add_argument("--ratings", help="ratings/interactions file")
    p.add_argument("--suppliers", help="item-supplier map file")
    p.add_argument("--format", choices=["tsv", "csv"])
    p.add_argument("--min-user", dest="min_user", type=int)
    p.add_argument("--min-item", dest="min_item", type=int)
    p.add_argument("--sample-users", dest="sample_users", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument(
        "--interactions", action="store_true",
        help="treat values as interaction counts and map them to 1..5 ratings",
    )
    p.add_argument(
        "--iterate-filter", action="store_true",
        help="repeat the user/item threshold passes until stable",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("recommend", help="produce the long top-t lists")
    common(p)
    p.add_argument("--algo", choices=["userknn", "mostpop", "import"])
    p.add_argument("--k", type=int)
    p.add_argument("--similarity", choices=["cosine", "pearson"])
    p.add_argument("--t", type=int)
    p.add_argument("--file", help="ranked-batch file for --algo import")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("rerank", help="post-process long lists into size n")
    common(p)
    p.add_argument("--variant", choices=list(ALL_VARIANTS))
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("evaluate", help="score a final batch")
    common(p)
    p.add_argument("--batch", help="final list file (default: <out>/final.tsv)")
    p.add_argument("--groups", action="store_true", help="emit the 10-group shift table")
    p.add_argument("--mcnemar", help="second batch for the paired significance test")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="rerank+evaluate over a parameter grid")
    common(p)
    p.add_argument("--variant", help="comma-separated variants")
    p.add_argument("--lambda", dest="lambda_", help="comma-separated grid")
    p.add_argument("--beta", help="comma-separated grid")
    p.add_argument("--n", type=int)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args) or 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FairflowError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
