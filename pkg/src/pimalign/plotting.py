"""PNG figures for placement comparisons and bandwidth sweeps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_COLORS = {"memory": "#2a6f97", "processor": "#c8553d"}
# fixed metadata keeps repeated renders identical
_META = {"Software": None}


def placement_figure(reports, path) -> Path:
    """GCUPS and energy side by side for each placement."""
    path = Path(path)
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3))
        names = [r.placement for r in reports]
        colors = [_COLORS.get(n, "grey") for n in names]
        ax1.bar(names, [r.gcups for r in reports], color=colors)
        ax1.set_ylabel("GCUPS")
        ax1.set_title("Throughput")
        ax2.bar(names, [r.energy.total_energy_j * 1e3 for r in reports], color=colors)
        ax2.set_ylabel("energy (mJ)")
        ax2.set_title("Energy per search")
        fig.tight_layout()
        fig.savefig(path, format="png", metadata=_META)
        plt.close(fig)
    return path


def sweep_figure(rows, path) -> Path:
    """Speedup and per-placement GCUPS against the bandwidth factor."""
    path = Path(path)
    factors = [r["factor"] for r in rows]
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3))
        ax1.plot(factors, [r["speedup"] for r in rows], "o-", color="black")
        ax1.axhline(1.0, color="grey", lw=0.8, ls="--")
        ax1.set_xlabel("internal / external bandwidth")
        ax1.set_ylabel("memory-side speedup")
        ax1.set_xticks(factors)
        ax2.plot(factors, [r["gcups_mem"] for r in rows], "o-", color=_COLORS["memory"], label="memory")
        ax2.plot(factors, [r["gcups_proc"] for r in rows], "s-", color=_COLORS["processor"],
                 label="processor")
        ax2.set_xlabel("internal / external bandwidth")
        ax2.set_ylabel("GCUPS")
        ax2.set_xticks(factors)
        ax2.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="png", metadata=_META)
        plt.close(fig)
    return path
