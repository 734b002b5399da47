"""Figure rendering for evaluation reports and sweep matrices.

Charts are written next to the delimited outputs they visualize; the
data itself always lives in the CSV/JSON files, so disabling rendering
loses nothing but the pictures.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

GROUP_LABELS = [f"G{k}" for k in range(1, 11)]


def render_group_shifts(item_shifts, supplier_shifts, path) -> None:
    """Grouped bar chart of visibility shifts, most visible group first."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    x = range(len(GROUP_LABELS))
    width = 0.38

    def clean(shifts):
        return [0.0 if s is None else s for s in shifts]

    ax.bar([i - width / 2 for i in x], clean(item_shifts), width, label="items")
    if supplier_shifts is not None:
        ax.bar(
            [i + width / 2 for i in x], clean(supplier_shifts), width, label="suppliers"
        )
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(list(x), GROUP_LABELS)
    ax.set_xlabel("visibility group (most visible first)")
    ax.set_ylabel("relative visibility shift")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_tradeoff(rows, metric, path) -> None:
    """Precision vs one non-accuracy metric, one line per variant.

    Rows are sweep records: dicts carrying variant, lambda and the
    metric columns. Points are annotated with their lambda value.
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    variants = sorted({r["variant"] for r in rows})
    for variant in variants:
        cells = [r for r in rows if r["variant"] == variant and r.get(metric) is not None]
        cells.sort(key=lambda r: (r.get("lambda") is None, r.get("lambda")))
        if not cells:
            continue
        xs = [r["P"] for r in cells]
        ys = [r[metric] for r in cells]
        ax.plot(xs, ys, marker="o", label=variant)
        for r, x, y in zip(cells, xs, ys):
            if r.get("lambda") is not None:
                ax.annotate(
                    f"{r['lambda']:g}", (x, y), fontsize=7,
                    textcoords="offset points", xytext=(4, 4),
                )
    ax.set_xlabel("precision")
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_charts(rows, out_dir, metrics=("1-IA", "LT", "IG", "IE", "SG", "SE")):
    """One trade-off chart per metric; returns the written paths."""
    paths = []
    for metric in metrics:
        safe = metric.replace("-", "").lower()
        path = out_dir / f"tradeoff_{safe}.png"
        render_tradeoff(rows, metric, path)
        paths.append(path)
    return paths
