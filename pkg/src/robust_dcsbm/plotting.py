"""Figures from a summary table: mean misclassification rate with
standard-error bars against whichever grid coordinate varies."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

X_PRIORITY = ["p", "shape", "m", "tau", "n"]
LABELS = {"p": "intra-cluster density p", "shape": "Pareto shape", "m": "number of outliers m",
          "tau": "outlier density tau", "n": "number of inliers n"}


def _num(s):
    return float(s) if s not in ("", None) else float("nan")


def plot_summary(summary: list[dict], out_dir, stem: str = "rate") -> list[Path]:
    """Write one PNG per summary; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not summary:
        return []
    varying = [c for c in X_PRIORITY if len({row[c] for row in summary}) > 1]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if varying:
        x = varying[0]
        rest = varying[1:]
        series: dict[tuple, list] = {}
        for row in summary:
            key = tuple(f"{c}={row[c]}" for c in rest) + (row["method"],)
            series.setdefault(key, []).append(row)
        for key, rows in series.items():
            rows = sorted(rows, key=lambda r: _num(r[x]))
            ax.errorbar([_num(r[x]) for r in rows], [r["mean"] for r in rows],
                        yerr=[r["stderr"] for r in rows], marker="o", ms=4, capsize=3,
                        label=", ".join(key))
        ax.set_xlabel(LABELS[x])
        name = f"{stem}_vs_{x}.png"
    else:
        methods = [row["method"] for row in summary]
        ax.bar(range(len(summary)), [r["mean"] for r in summary],
               yerr=[r["stderr"] for r in summary], capsize=4, color="0.6")
        ax.set_xticks(range(len(summary)))
        ax.set_xticklabels(methods)
        name = f"{stem}_by_method.png"
    ax.set_ylabel("misclassification rate")
    ax.set_ylim(bottom=0)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    if varying:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    path = out / name
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
