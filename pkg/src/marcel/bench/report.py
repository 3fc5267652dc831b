"""Summaries of persisted results: delimited tables and a bar chart."""

from __future__ import annotations

import csv
import io
from collections import OrderedDict

from marcel.bench.experiment import select_best
from marcel.io.results import ExperimentRecord

COLUMNS = ("dataset", "task", "model", "strategy", "config_hash", "repeats", "aborted",
           "selected_seed", "val_mae", "test_mae")


def summarize(records: list[ExperimentRecord]) -> list[dict]:
    """One row per configuration, reporting the repeat with the lowest validation MAE."""
    groups: OrderedDict[str, list[ExperimentRecord]] = OrderedDict()
    for r in records:
        groups.setdefault(r.config_hash, []).append(r)
    rows = []
    for h, recs in groups.items():
        best = select_best(recs)
        first = recs[0]
        rows.append({
            "dataset": first.dataset, "task": first.task, "model": first.model,
            "strategy": first.strategy, "config_hash": h[:12], "repeats": len(recs),
            "aborted": sum(r.aborted for r in recs),
            "selected_seed": best.seed if best else "",
            "val_mae": best.val_mae if best else float("nan"),
            "test_mae": best.test_mae if best else float("nan"),
        })
    return rows


def format_table(rows: list[dict], delimiter: str = "\t") -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, delimiter=delimiter, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def render_figure(rows: list[dict], path) -> None:
    """Horizontal bar chart of the selected test MAE per configuration."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [f"{r['dataset']}/{r['task']} {r['model']}:{r['strategy']}" for r in rows]
    values = [r["test_mae"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(rows) + 1.2))
    ax.barh(range(len(rows)), values, color="#4c72b0")
    ax.set_yticks(range(len(rows)), labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("test MAE (best-validation repeat)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
