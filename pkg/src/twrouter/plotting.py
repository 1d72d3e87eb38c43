"""Figures for benchmark reports: gap bars, scaling curves, route maps.

All figures are rendered off-screen and written as SVG. The SVG hash salt
and metadata date are pinned so identical data gives identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "twrouter",
    "svg.fonttype": "none",
}

SERIES_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3")


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def gap_chart(series: Mapping[str, Mapping[str, float]], path: str | Path,
              title: str = "Deviation from best known solution") -> Path:
    """Grouped bars, one group per instance and one bar per solver series.

    Each bar carries the SVG id ``bar-<solver>-<instance>``.
    """
    instances = sorted({name for gaps in series.values() for name in gaps})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.2))
        k = max(len(series), 1)
        width = 0.8 / k
        for s, (solver, gaps) in enumerate(series.items()):
            xs = [i + (s - (k - 1) / 2) * width for i, name in enumerate(instances) if name in gaps]
            ys = [gaps[name] for name in instances if name in gaps]
            bars = ax.bar(xs, ys, width, label=solver, color=SERIES_COLORS[s % len(SERIES_COLORS)])
            for bar, name in zip(bars, [n for n in instances if n in gaps]):
                bar.set_gid(f"bar-{solver}-{name}")
        ax.set_xticks(range(len(instances)))
        ax.set_xticklabels(instances)
        ax.set_ylabel("gap (%)")
        ax.set_title(title)
        if series:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def scaling_chart(points: Sequence, path: str | Path, instance: str = "") -> Path:
    """Mean violation proportion against stop count, one line per repair setting."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for repair, color in ((False, SERIES_COLORS[0]), (True, SERIES_COLORS[1])):
            pts = sorted((p for p in points if p.repair == repair), key=lambda p: p.stops)
            if not pts:
                continue
            (line,) = ax.plot([p.stops for p in pts], [p.mean_violation_proportion for p in pts],
                              marker="o", color=color, label="repaired" if repair else "raw backend")
            line.set_gid("line-repaired" if repair else "line-raw")
        ax.set_xlabel("stops")
        ax.set_ylabel("violated stops / stops")
        ax.set_ylim(bottom=0)
        ax.set_title(f"Time-window violations {instance}".strip())
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def route_map(instance, routes: Sequence[Sequence[int]], path: str | Path, title: str | None = None) -> Path:
    xs = [n.x for n in instance.nodes]
    ys = [n.y for n in instance.nodes]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.scatter(xs[1:], ys[1:], s=8, color="0.4", zorder=3)
        ax.scatter([xs[0]], [ys[0]], s=40, marker="s", color="k", zorder=4)
        cmap = plt.get_cmap("tab20")
        for k, r in enumerate(routes):
            tour = [0, *r, 0]
            (line,) = ax.plot([xs[v] for v in tour], [ys[v] for v in tour], lw=1.0, color=cmap(k % 20))
            line.set_gid(f"route-{k}")
        ax.set_aspect("equal")
        ax.set_title(title or instance.name)
        fig.tight_layout()
        return _save(fig, path)
