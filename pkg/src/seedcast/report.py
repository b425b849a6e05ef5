"""Report emission: delimited output plus rendered figures.

Every report lands in three forms side by side: a CSV, an aligned
plain-text table (both with metrics at 3-decimal precision), and a PNG
bar chart of MSE/MAE per row.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .pipeline import ReportRow

COLUMNS = ("dataset", "variant", "mse", "mae", "train_time_s",
           "params_trainable", "params_frozen")


def _cells(row: ReportRow) -> list[str]:
    return [row.dataset, row.variant, f"{row.mse:.3f}", f"{row.mae:.3f}",
            f"{row.train_time_s:.3f}", str(row.params_trainable), str(row.params_frozen)]


def render_csv(rows: list[ReportRow]) -> str:
    lines = [",".join(COLUMNS)]
    lines += [",".join(_cells(r)) for r in rows]
    return "\n".join(lines) + "\n"


def render_table(rows: list[ReportRow]) -> str:
    """Space-padded table whose column widths fit the longest cell."""
    grid = [list(COLUMNS)] + [_cells(r) for r in rows]
    widths = [max(len(row[i]) for row in grid) for i in range(len(COLUMNS))]
    lines = []
    for i, row in enumerate(grid):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_metrics_figure(rows: list[ReportRow], path: Path) -> None:
    labels = [f"{r.dataset}\n{r.variant}" for r in rows]
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(rows)), 3.2))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [r.mse for r in rows], width, label="MSE")
    ax.bar([i + width / 2 for i in x], [r.mae for r in rows], width, label="MAE")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("error (normalized)")
    ax.set_title("forecast error by variant")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_history_figure(history: list[dict], path: Path) -> None:
    epochs = [h["epoch"] for h in history if not h.get("final")]
    train = [h["train_loss"] for h in history if not h.get("final")]
    val = [h["val_loss"] for h in history if not h.get("final")]
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(epochs, train, marker="o", label="train loss")
    ax.plot(epochs, val, marker="s", label="val loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE (normalized)")
    ax.set_title("training progress")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def emit_report(rows: list[ReportRow], out_dir: str | Path,
                basename: str = "report") -> dict[str, Path]:
    """Write <basename>.csv, .txt and .png into out_dir; returns the paths."""
    if not rows:
        raise ValueError("emit_report needs at least one row")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / f"{basename}.csv",
        "txt": out / f"{basename}.txt",
        "png": out / f"{basename}.png",
    }
    paths["csv"].write_text(render_csv(rows), encoding="utf-8")
    paths["txt"].write_text(render_table(rows), encoding="utf-8")
    render_metrics_figure(rows, paths["png"])
    return paths
