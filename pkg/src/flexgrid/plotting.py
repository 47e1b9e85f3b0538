"""Per-step stacked flexibility figures (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from flexgrid.assess import ScenarioResult, fmt_percent  # noqa: E402

COLOURS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def plot_scenario(result: ScenarioResult, path: str | Path) -> Path:
    """Stacked per-step contribution of each stack layer as % of site load.

    Written with no software/date metadata so reruns are byte-identical.
    """
    path = Path(path)
    labels = [s.strftime("%H:%M") for s in result.timestamps]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(7.0, 4.0), dpi=100)
    below = np.zeros(len(x))
    for k, p in enumerate(result.prefixes):
        layer = p.percent - below
        ax.bar(x, layer, bottom=below, width=0.8, color=COLOURS[k % len(COLOURS)],
               label=f"{p.label} (up to {fmt_percent(p.peak_percent)})")
        below = p.percent.copy()
    step = max(1, len(x) // 8)
    ax.set_xticks(x[::step])
    ax.set_xticklabels(labels[::step])
    ax.set_ylabel("flexibility (% of site load)")
    ax.set_xlabel("time of day")
    spec = result.spec
    ax.set_title(f"{spec.season.value.title()} {spec.duration_h:g} h event")
    ax.set_ylim(0, max(10.0, float(below.max()) * 1.25 if len(below) else 10.0))
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def figure_name(result: ScenarioResult) -> str:
    return f"flex_{result.spec.season.value}_{result.spec.duration_h:g}h.png"
