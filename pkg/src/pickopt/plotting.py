"""Figure rendering for solve runs and study reports.

Everything draws through the Agg backend and writes straight to files, so
the module works in headless runs and keeps output byte-stable apart from
whatever the matplotlib version embeds in the PNG itself.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import Report, trajectory_points  # noqa: E402
from .instance import Instance  # noqa: E402
from .solution import Solution  # noqa: E402

_AXIS_LABELS = {
    "returns": ("instance", "cost"),
    "splitup": ("split fee", "cost"),
    "capacity": ("picker capacity", "cost"),
    "deadlines": ("picker capacity", "cost"),
}


def plot_series(points, path, title="", xlabel="", ylabel="",
                logx=False) -> None:
    """Render (x, y, series) triples as one line per series."""
    by_series: dict[str, list[tuple[float, float]]] = {}
    for x, y, series in points:
        by_series.setdefault(series, []).append((x, y))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for series in sorted(by_series):
        pts = sorted(by_series[series])
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", markersize=3, linewidth=1.2, label=series)
    if logx:
        ax.set_xscale("symlog", linthresh=0.01)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if by_series:
        ax.legend(fontsize=8)
    ax.grid(True, linewidth=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trajectory(log, path, title="best-known cost per context") -> None:
    """Best cost of every search context over the iteration counter."""
    plot_series(trajectory_points(log), path, title=title,
                xlabel="iteration", ylabel="cost")


def plot_report(report: Report, out_dir, prefix="") -> list[Path]:
    """One figure per plot group of the report; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    xlabel, ylabel = _AXIS_LABELS.get(report.kind, ("x", "y"))
    written = []
    for name in sorted(report.plots):
        path = out_dir / f"{prefix}{name}.png"
        plot_series(report.plots[name], path, title=f"{report.kind}: {name}",
                    xlabel=xlabel, ylabel=ylabel,
                    logx=report.kind == "splitup")
        written.append(path)
    return written


def plot_solution(solution: Solution, instance: Instance, path,
                  title="") -> None:
    """Schematic top view: aisles, stops and batch routes per picker."""
    layout = instance.layout
    width = layout.aisle_width

    def xy(line_id):
        loc = instance.order_lines[line_id].location
        return loc.aisle * width, loc.offset

    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for a in range(layout.num_aisles):
        ax.plot([a * width, a * width], [0.0, layout.aisle_length],
                color="0.85", linewidth=1.0, zorder=0)
    depot_x = layout.depot.aisle * width
    ax.plot([depot_x], [0.0], marker="s", markersize=9, color="black",
            zorder=5)
    ax.annotate("depot", (depot_x, 0.0), textcoords="offset points",
                xytext=(6, -12), fontsize=8)

    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for picker, batch_list in enumerate(solution.routes):
        color = colors[picker % len(colors)]
        labeled = False
        for route in batch_list:
            xs = [depot_x]
            ys = [0.0]
            for lid in route.stops:
                x, y = xy(lid)
                xs.append(x)
                ys.append(y)
            xs.append(depot_x)
            ys.append(0.0)
            ax.plot(xs, ys, color=color, linewidth=1.0, alpha=0.6,
                    label=None if labeled else f"picker {picker}")
            labeled = True
            ax.scatter(xs[1:-1], ys[1:-1], s=14, color=color, zorder=4)
    ax.set_title(title)
    ax.set_xlabel("cross-aisle position (m)")
    ax.set_ylabel("aisle offset (m)")
    ax.set_xlim(-width, layout.num_aisles * width)
    ax.set_ylim(-layout.aisle_length * 0.06, layout.aisle_length * 1.04)
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
