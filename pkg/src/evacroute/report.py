"""Matplotlib figures for a finished grid run, written next to the CSVs.

The standard report views: total time vs capacity with the 24 h and
42 h windows, fleet size vs capacity (points beyond the window are not
shown), and the percentage-change comparisons between solvers.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .scenarios import ScenarioResult, comparison_rows

_SOLVER_STYLE = {"neural": "o-", "sweep": "s--", "exact": "^:"}


def _threshold_lines(ax):
    ax.axhline(42, color="red", linestyle="--", linewidth=1, label="42 h window")
    ax.axhline(24, color="goldenrod", linestyle="--", linewidth=1, label="24 h window")


def write_grid_figures(rows: list[ScenarioResult], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = [r for r in rows if not r.failed]
    datasets = sorted({r.dataset for r in ok})
    transits = sorted({r.transit_hours for r in ok})
    solvers = sorted({r.solver for r in ok})
    written: list[Path] = []

    for ds in datasets:
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for solver in solvers:
            for transit in transits:
                pts = sorted(
                    (r.capacity, r.total_hours) for r in ok
                    if r.dataset == ds and r.solver == solver and r.transit_hours == transit
                )
                if pts:
                    ax.plot(*zip(*pts), _SOLVER_STYLE.get(solver, "o-"),
                            markersize=4, label=f"{solver}, +{transit:g} h/route")
        _threshold_lines(ax)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("vehicle capacity (people)")
        ax.set_ylabel("total evacuation time (hours)")
        ax.set_title(f"{ds}: social distancing vs evacuation time")
        ax.legend(fontsize=7)
        path = out_dir / f"time_vs_capacity_{_slug(ds)}.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(6, 4.5))
        for solver in solvers:
            for transit in transits:
                pts = sorted(
                    (r.capacity, r.vehicles_needed) for r in ok
                    if r.dataset == ds and r.solver == solver
                    and r.transit_hours == transit and not r.beyond_window
                )
                if pts:
                    ax.plot(*zip(*pts), _SOLVER_STYLE.get(solver, "o-"),
                            markersize=4, label=f"{solver}, +{transit:g} h/route")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("vehicle capacity (people)")
        ax.set_ylabel("vehicles needed for the registry")
        ax.set_title(f"{ds}: fleet size (within 42 h window)")
        ax.legend(fontsize=7)
        path = out_dir / f"fleet_vs_capacity_{_slug(ds)}.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    comps = comparison_rows(rows)
    if comps:
        for metric, fname, ylabel in (
            ("pct_change_time", "pct_change_time.png", "% change in evacuation time"),
            ("pct_change_routes", "pct_change_routes.png", "% change in number of routes"),
        ):
            fig, ax = plt.subplots(figsize=(6, 4.5))
            for ds in datasets:
                for transit in transits:
                    pts = sorted(
                        (c["capacity"], c[metric]) for c in comps
                        if c["dataset"] == ds and c["transit_hours"] == transit
                    )
                    if pts:
                        ax.plot(*zip(*pts), "o-", markersize=4,
                                label=f"{ds}, +{transit:g} h/route")
            ax.axhline(0, color="red", linestyle="--", linewidth=1)
            ax.set_xscale("log", base=2)
            ax.set_xlabel("vehicle capacity (people)")
            ax.set_ylabel(ylabel)
            ax.set_title("neural vs sweep")
            ax.legend(fontsize=6)
            path = out_dir / fname
            fig.savefig(path, dpi=120, bbox_inches="tight")
            plt.close(fig)
            written.append(path)

    return written


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in name)
