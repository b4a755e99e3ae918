"""SVG line charts of run series.  CSV files carry the data; these are for
looking at."""
from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

# Fixed ids and no timestamp keep the SVG text reproducible.
matplotlib.rcParams["svg.hashsalt"] = "conhj"
_META = {"Date": None}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    return path


def line_chart(path, series, *, xlabel: str, ylabel: str, title: str = "") -> Path:
    """``series`` maps a legend label to an ``(x, y)`` pair."""
    fig = Figure(figsize=(6.0, 3.6))
    ax = fig.add_subplot()
    for name, (x, y) in series.items():
        ax.plot(x, y, lw=1.2, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False, fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def snapshot_chart(path, x, times, snapshots, *, max_curves: int = 6, xlim=None) -> Path:
    fig = Figure(figsize=(6.0, 3.6))
    ax = fig.add_subplot()
    idx = np.unique(np.linspace(0, len(times) - 1, min(max_curves, len(times))).round().astype(int))
    for k in idx:
        ax.plot(x, snapshots[k], lw=1.0, label=f"t = {times[k]:.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u(x, t)")
    if xlim is not None:
        ax.set_xlim(*xlim)
    ax.legend(frameon=False, fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def limit_figures(out_dir, runs: dict) -> list:
    """I(t), maximum point and field snapshots for one or more limit runs."""
    out_dir = Path(out_dir)
    written = [
        line_chart(out_dir / "I.svg", {k: (r.I_times, r.I) for k, r in runs.items()}, xlabel="t", ylabel="I(t)"),
        line_chart(out_dir / "xbar.svg", {k: (r.step_times, r.x_argmax) for k, r in runs.items()},
                   xlabel="t", ylabel="maximum point"),
    ]
    first = next(iter(runs.values()))
    written.append(snapshot_chart(out_dir / "snapshots.svg", first.grid.x, first.snapshot_times, first.snapshots,
                                  xlim=(first.grid.x_min, min(first.grid.x_max, 6.0))))
    return [p.name for p in written]


def viscous_figures(out_dir, sol, prefix: str = "") -> list:
    out_dir = Path(out_dir)
    written = [
        line_chart(out_dir / f"{prefix}I.svg", {f"eps = {sol.epsilon:g}": (sol.times, sol.I)},
                   xlabel="t", ylabel="I_eps(t)"),
        line_chart(out_dir / f"{prefix}xbar.svg", {f"eps = {sol.epsilon:g}": (sol.times, sol.x_max)},
                   xlabel="t", ylabel="maximum point"),
        snapshot_chart(out_dir / f"{prefix}snapshots.svg", sol.config.grid.x, sol.snapshot_times, sol.snapshots,
                       xlim=(sol.config.grid.x_min, min(sol.config.grid.x_max, 6.0))),
    ]
    return [p.name for p in written]


def trajectory_figure(out_dir, traj, zero_level=None) -> list:
    series = {"path": (traj.times, traj.positions)}
    if zero_level is not None:
        series["zero level of R"] = zero_level
    p = line_chart(Path(out_dir) / "trajectory.svg", series, xlabel="s", ylabel="position")
    return [p.name]
