"""Experiment grid: datasets x capacities x transit times x solvers.

Each cell solves one evacuation scenario (splitting the instance first
when household demand exceeds the vehicle capacity), classifies the
total time against the 24 h / 42 h timeline, and estimates how many
vehicles the city registry would need at that cell's throughput.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product

from .instances import EvacInstance, NormalizedInstance, normalize
from .solver import (
    FleetPlan,
    Route,
    SolverError,
    TimeModel,
    attach_times,
    exact_solve,
    split_parts,
    sweep_solve,
)

SOLVERS = ("sweep", "neural", "exact")


class ScenarioError(Exception):
    pass


class DivisionByZero(ScenarioError):
    pass


class TimelineClass(enum.IntEnum):
    SATISFACTORY = 0
    BORDERLINE = 1
    NOT_ALLOWED = 2

    @property
    def label(self) -> str:
        return {0: "Satisfactory", 1: "Borderline", 2: "NotAllowed"}[self.value]


@dataclass(frozen=True)
class ScenarioConfig:
    capacity: int = 64
    transit_hours: float = 0.0
    speed_kmh: float = 8.0
    satisfactory_hours: float = 24.0
    allowed_hours: float = 42.0
    registry_size: int = 4000
    solver: str = "sweep"

    def __post_init__(self):
        if self.capacity < 1:
            raise ScenarioError("capacity must be >= 1")
        if not self.satisfactory_hours < self.allowed_hours:
            raise ScenarioError("satisfactory threshold must sit below the allowed one")
        if self.solver not in SOLVERS:
            raise ScenarioError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")


@dataclass(frozen=True)
class ScenarioResult:
    dataset: str
    houses: int
    population: int
    capacity: int
    transit_hours: float
    solver: str
    total_hours: float | None
    n_routes: int | None
    timeline_class: TimelineClass | None
    vehicles_needed: int | None
    beyond_window: bool
    per_route: tuple[Route, ...]
    n_parts: int
    seed: int
    checkpoint_hash: str = ""
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def classify_time(total_hours: float, cfg: ScenarioConfig) -> TimelineClass:
    """Timeline verdict; both boundary hours fall in the Borderline band."""
    if total_hours < 0:
        raise ScenarioError("total_hours must be >= 0")
    if total_hours < cfg.satisfactory_hours:
        return TimelineClass.SATISFACTORY
    if total_hours <= cfg.allowed_hours:
        return TimelineClass.BORDERLINE
    return TimelineClass.NOT_ALLOWED


def _people_within(loads, hours, window):
    total = 0.0
    people = 0
    for load, h in zip(loads, hours):
        total += h
        if total > window:
            break
        people += load
    return people


def estimate_fleet(result: ScenarioResult, cfg: ScenarioConfig) -> int | None:
    """Vehicles needed for the registry, from one vehicle's window throughput.

    Returns None (beyond the window) when not even the first route
    completes inside the allowed window.
    """
    loads = [r.picked_up for r in result.per_route]
    hours = [r.time_hours for r in result.per_route]
    p = _people_within(loads, hours, cfg.allowed_hours)
    if p == 0:
        return None
    return math.ceil(cfg.registry_size / p)


def pct_change_time(t_dnn: float, t_non: float) -> float:
    if t_non == 0:
        raise DivisionByZero("reference evacuation time is zero")
    return (t_dnn - t_non) / t_non * 100.0


def pct_change_routes(r_dnn: int, r_non: int) -> float:
    if r_non == 0:
        raise DivisionByZero("reference route count is zero")
    return (r_dnn - r_non) / r_non * 100.0


def _solve_part(part: NormalizedInstance, cfg: ScenarioConfig, policy) -> FleetPlan:
    if cfg.solver == "sweep":
        return sweep_solve(part, cfg.capacity)
    if cfg.solver == "exact":
        return exact_solve(part, cfg.capacity)
    if policy is None:
        raise ScenarioError("neural solver needs policy params (checkpoint or seeded init)")
    from .neural import solve_greedy

    return solve_greedy(part, cfg.capacity, policy)


def run_scenario(
    dataset: str,
    inst: EvacInstance,
    cfg: ScenarioConfig,
    policy=None,
    seed: int = 0,
    checkpoint_hash: str = "",
) -> ScenarioResult:
    """Solve one grid cell; splits the instance first when needed.

    The vehicle works the parts in order, so route details concatenate
    across parts and the cell total is their combined time.
    """
    norm = normalize(inst)
    parts = [
        NormalizedInstance(base=p, scale_km_per_unit=norm.scale_km_per_unit)
        for p in split_parts(norm.base, cfg.capacity)
    ]
    tm = TimeModel(speed_kmh=cfg.speed_kmh, transit_hours_per_route=cfg.transit_hours)
    routes: list[Route] = []
    for part in parts:
        plan = _solve_part(part, cfg, policy)
        routes.extend(attach_times(plan, part, tm).routes)

    # summed this way, switching transit shifts the total by exactly
    # transit * n_routes (the per-route times already include transit)
    total = math.fsum(r.length_km for r in routes) / cfg.speed_kmh \
        + cfg.transit_hours * len(routes)

    result = ScenarioResult(
        dataset=dataset,
        houses=inst.n_houses,
        population=inst.population,
        capacity=cfg.capacity,
        transit_hours=cfg.transit_hours,
        solver=cfg.solver,
        total_hours=total,
        n_routes=len(routes),
        timeline_class=classify_time(total, cfg),
        vehicles_needed=None,
        beyond_window=False,
        per_route=tuple(routes),
        n_parts=len(parts),
        seed=seed,
        checkpoint_hash=checkpoint_hash,
    )
    fleet = estimate_fleet(result, cfg)
    return replace(result, vehicles_needed=fleet, beyond_window=fleet is None)


def resolve_threads(n_cells: int, requested: int = 0) -> int:
    """0 means auto; anything else caps the worker count."""
    if requested < 0:
        raise ScenarioError("thread count must be >= 0")
    auto = min(8, os.cpu_count() or 1, n_cells)
    return max(1, auto if requested == 0 else min(requested, n_cells))


def run_grid(
    datasets: list[tuple[str, EvacInstance]],
    capacities=(64, 32, 16, 8, 4, 2),
    transits=(0.0, 0.5, 1.0, 2.0),
    solvers=("sweep", "neural"),
    policy=None,
    demand_seed: int = 0,
    registry_size: int = 4000,
    speed_kmh: float = 8.0,
    checkpoint_hash: str = "",
    max_workers: int = 0,
) -> list[ScenarioResult]:
    """Run the full ladder. Cells are independent; a solver error marks
    its cell failed without aborting the rest. Rows come back sorted by
    (dataset, capacity, transit, solver) so reruns emit identical CSVs."""
    cells = list(product(datasets, capacities, transits, solvers))

    def one(cell) -> ScenarioResult:
        (name, inst), capacity, transit, solver = cell
        cfg = ScenarioConfig(
            capacity=capacity,
            transit_hours=transit,
            speed_kmh=speed_kmh,
            registry_size=registry_size,
            solver=solver,
        )
        hash_for_row = checkpoint_hash if solver == "neural" else ""
        try:
            return run_scenario(
                name, inst, cfg, policy=policy, seed=demand_seed,
                checkpoint_hash=hash_for_row,
            )
        except (SolverError, ScenarioError) as exc:
            return ScenarioResult(
                dataset=name, houses=inst.n_houses, population=inst.population,
                capacity=capacity, transit_hours=transit, solver=solver,
                total_hours=None, n_routes=None, timeline_class=None,
                vehicles_needed=None, beyond_window=False, per_route=(),
                n_parts=0, seed=demand_seed, checkpoint_hash=hash_for_row,
                error=f"{type(exc).__name__}: {exc}",
            )

    workers = resolve_threads(len(cells), max_workers)
    if workers == 1:
        rows = [one(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, cells))
    rows.sort(key=lambda r: (r.dataset, r.capacity, r.transit_hours, r.solver))
    return rows


def results_csv(rows: list[ScenarioResult]) -> str:
    header = ("dataset,houses,population,capacity,transit_hours,solver,total_hours,"
              "n_routes,timeline_class,vehicles_needed,seed,checkpoint_hash")
    lines = [header]
    for r in rows:
        if r.failed:
            tclass, total, n_routes, fleet = f"failed:{r.error.split(':')[0]}", "", "", ""
        else:
            tclass = r.timeline_class.label
            total = f"{r.total_hours:.6f}"
            n_routes = str(r.n_routes)
            fleet = "beyond_window" if r.beyond_window else str(r.vehicles_needed)
        lines.append(
            f"{r.dataset},{r.houses},{r.population},{r.capacity},{r.transit_hours:g},"
            f"{r.solver},{total},{n_routes},{tclass},{fleet},{r.seed},{r.checkpoint_hash}"
        )
    return "\n".join(lines) + "\n"


def comparison_rows(rows: list[ScenarioResult]) -> list[dict]:
    """Neural-vs-sweep percentage changes per (dataset, capacity, transit)."""
    by_key: dict[tuple, dict[str, ScenarioResult]] = {}
    for r in rows:
        if not r.failed:
            by_key.setdefault((r.dataset, r.capacity, r.transit_hours), {})[r.solver] = r
    out = []
    for (dataset, capacity, transit), pair in sorted(by_key.items()):
        if "sweep" not in pair or "neural" not in pair:
            continue
        dnn, non = pair["neural"], pair["sweep"]
        out.append({
            "dataset": dataset,
            "capacity": capacity,
            "transit_hours": transit,
            "pct_change_time": pct_change_time(dnn.total_hours, non.total_hours),
            "pct_change_routes": pct_change_routes(dnn.n_routes, non.n_routes),
        })
    return out


def comparison_csv(rows: list[ScenarioResult]) -> str:
    lines = ["dataset,capacity,transit_hours,pct_change_time,pct_change_routes"]
    for c in comparison_rows(rows):
        lines.append(
            f"{c['dataset']},{c['capacity']},{c['transit_hours']:g},"
            f"{c['pct_change_time']:.6f},{c['pct_change_routes']:.6f}"
        )
    return "\n".join(lines) + "\n"
