"""Solution representation, constraint validation, and the two desk-scale solvers.

A plan is an ordered list of depot-anchored routes over house indices.
The route encoding cannot express depot-disconnected subtours, so the
classic subtour-elimination constraint holds structurally; validation
checks the remaining feasibility conditions (exactly-once coverage,
capacity, index sanity) as data rather than exceptions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .instances import EvacInstance, NormalizedInstance, manhattan_km


class SolverError(Exception):
    """Base class for solver failures."""


class DemandExceedsCapacity(SolverError):
    pass


class TooLarge(SolverError):
    pass


class InvalidPlan(SolverError):
    pass


@dataclass(frozen=True)
class TimeModel:
    """Vehicle speed plus the fixed per-route transit to the central depot."""

    speed_kmh: float = 8.0
    transit_hours_per_route: float = 0.0

    def __post_init__(self):
        if not self.speed_kmh > 0:
            raise SolverError("speed_kmh must be positive")
        if self.transit_hours_per_route < 0:
            raise SolverError("transit_hours_per_route must be >= 0")


@dataclass(frozen=True)
class Route:
    """One depot-to-depot trip. ``visits`` are house indices; the depot is
    implicit at both ends. ``time_hours`` is filled once a TimeModel is
    applied and includes the per-route transit."""

    visits: tuple[int, ...]
    picked_up: int
    length_km: float
    time_hours: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "visits", tuple(int(v) for v in self.visits))


@dataclass(frozen=True)
class FleetPlan:
    routes: tuple[Route, ...]
    instance_ref: str
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(self.routes))

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    @property
    def total_length_km(self) -> float:
        return math.fsum(r.length_km for r in self.routes)


def route_length_km(visits: tuple[int, ...], inst: NormalizedInstance) -> float:
    """Manhattan tour length depot -> visits... -> depot, in km."""
    scale = inst.scale_km_per_unit
    pts = [inst.base.depot] + [inst.base.houses[v] for v in visits] + [inst.base.depot]
    return math.fsum(manhattan_km(pts[i], pts[i + 1], scale) for i in range(len(pts) - 1))


def make_route(visits: list[int] | tuple[int, ...], inst: NormalizedInstance) -> Route:
    visits = tuple(visits)
    return Route(
        visits=visits,
        picked_up=sum(inst.base.demands[v] for v in visits),
        length_km=route_length_km(visits, inst),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    route_index: int | None = None
    house: int | None = None

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(plan: FleetPlan, inst: EvacInstance, capacity: int) -> ValidationReport:
    """Check a plan against the feasibility constraints.

    Zero violations certifies: every house visited exactly once, no route
    over capacity, no empty route, no duplicate visit within a route, all
    indices in range.
    """
    n = inst.n_houses
    problems: list[Violation] = []
    seen: dict[int, int] = {}

    for k, route in enumerate(plan.routes):
        if not route.visits:
            problems.append(Violation("EmptyRoute", f"route {k} visits no house", route_index=k))
            continue
        load = 0
        route_seen = set()
        for v in route.visits:
            if not 0 <= v < n:
                problems.append(Violation(
                    "IndexOutOfRange", f"route {k} visits house {v}, valid range 0..{n - 1}",
                    route_index=k, house=v))
                continue
            if v in route_seen:
                problems.append(Violation(
                    "DuplicateVisit", f"route {k} visits house {v} more than once",
                    route_index=k, house=v))
            route_seen.add(v)
            if v in seen and seen[v] != k:
                problems.append(Violation(
                    "DuplicateVisit", f"house {v} appears in routes {seen[v]} and {k}",
                    route_index=k, house=v))
            seen[v] = k
            load += inst.demands[v]
        if load > capacity:
            problems.append(Violation(
                "CapacityExceeded", f"route {k} picks up {load} > capacity {capacity}",
                route_index=k))

    for h in range(n):
        if h not in seen:
            problems.append(Violation("MissingHouse", f"house {h} is never visited", house=h))

    return ValidationReport(violations=tuple(problems))


def evaluate_time(
    plan: FleetPlan, inst: NormalizedInstance, tm: TimeModel
) -> tuple[float, list[float]]:
    """Total and per-route evacuation hours under a time model.

    Per-route time is tour length / speed plus the fixed transit; depot
    legs are part of the length even though route maps hide them. The
    total is computed as sum(lengths)/speed + transit * n_routes so that
    total(transit=t) - total(transit=0) equals t * n_routes exactly.
    """
    report = validate(plan, inst.base, plan.capacity)
    if not report.ok:
        raise InvalidPlan("; ".join(str(v) for v in report.violations))
    lengths = [route_length_km(r.visits, inst) for r in plan.routes]
    per_route = [l / tm.speed_kmh + tm.transit_hours_per_route for l in lengths]
    total = math.fsum(lengths) / tm.speed_kmh + tm.transit_hours_per_route * len(lengths)
    return total, per_route


def attach_times(plan: FleetPlan, inst: NormalizedInstance, tm: TimeModel) -> FleetPlan:
    """Return a copy of the plan whose routes carry their evaluated times."""
    _, per_route = evaluate_time(plan, inst, tm)
    routes = tuple(replace(r, time_hours=t) for r, t in zip(plan.routes, per_route))
    return replace(plan, routes=routes)


def _sweep_order(inst: NormalizedInstance, start_angle: float) -> list[int]:
    depot = inst.base.depot
    keyed = []
    for i, (x, y) in enumerate(inst.base.houses):
        theta = math.atan2(y - depot[1], x - depot[0]) % (2 * math.pi)
        rel = (theta - start_angle) % (2 * math.pi)
        radial = abs(x - depot[0]) + abs(y - depot[1])
        keyed.append((rel, radial, i))
    keyed.sort()
    return [i for _, _, i in keyed]


def sweep_solve(
    inst: NormalizedInstance, capacity: int, start_angle: float = 0.0
) -> FleetPlan:
    """Sweep heuristic: order houses by polar angle about the depot,
    counter-clockwise from the start ray, and fill routes greedily.

    A route closes when the next house in sweep order would exceed the
    capacity; visit order within a route is the sweep order itself.
    Angle ties break nearer-first by radial distance. Deterministic.
    """
    demands = inst.base.demands
    worst = max(demands)
    if worst > capacity:
        raise DemandExceedsCapacity(
            f"house demand {worst} exceeds capacity {capacity}; split the instance first"
        )
    routes: list[Route] = []
    current: list[int] = []
    load = 0
    for i in _sweep_order(inst, start_angle):
        if load + demands[i] > capacity:
            routes.append(make_route(current, inst))
            current, load = [], 0
        current.append(i)
        load += demands[i]
    if current:
        routes.append(make_route(current, inst))
    return FleetPlan(routes=tuple(routes), instance_ref=inst.base.name, capacity=capacity)


MAX_EXACT_HOUSES = 10


def exact_solve(inst: NormalizedInstance, capacity: int) -> FleetPlan:
    """Optimal plan by dynamic programming over house subsets.

    Minimizes the total Manhattan tour length over all partitions of the
    houses into capacity-feasible groups with each group's visit order
    solved exactly. Ties break toward fewer routes, then lexicographic
    visit order. Guarded to small instances.
    """
    n = inst.base.n_houses
    if n > MAX_EXACT_HOUSES:
        raise TooLarge(f"{n} houses > enumeration guard {MAX_EXACT_HOUSES}")
    demands = inst.base.demands
    if max(demands) > capacity:
        raise DemandExceedsCapacity(
            f"house demand {max(demands)} exceeds capacity {capacity}; split the instance first"
        )

    scale = inst.scale_km_per_unit
    pts = [inst.base.depot] + list(inst.base.houses)
    dist = [[manhattan_km(a, b, scale) for b in pts] for a in pts]

    full = (1 << n) - 1
    subset_demand = [0] * (full + 1)
    for s in range(1, full + 1):
        low = (s & -s).bit_length() - 1
        subset_demand[s] = subset_demand[s & (s - 1)] + demands[low]

    # dp[s][j]: cheapest depot-anchored path visiting set s, ending at house j.
    # Left-to-right accumulation keeps costs bit-identical with a naive
    # permutation enumerator, which the tests rely on.
    NO = math.inf
    dp = [[NO] * n for _ in range(full + 1)]
    parent: list[list[int]] = [[-1] * n for _ in range(full + 1)]
    for j in range(n):
        dp[1 << j][j] = dist[0][j + 1]
    for s in range(1, full + 1):
        for j in range(n):
            if not (s >> j) & 1:
                continue
            cur = dp[s][j]
            if cur == NO:
                continue
            rest = full & ~s
            t = rest
            while t:
                k = (t & -t).bit_length() - 1
                t &= t - 1
                cand = cur + dist[j + 1][k + 1]
                ns = s | (1 << k)
                if cand < dp[ns][k]:
                    dp[ns][k] = cand
                    parent[ns][k] = j

    cycle_cost = [NO] * (full + 1)
    cycle_end = [-1] * (full + 1)
    for s in range(1, full + 1):
        if subset_demand[s] > capacity:
            continue
        best, best_j = NO, -1
        for j in range(n):
            if (s >> j) & 1 and dp[s][j] != NO:
                c = dp[s][j] + dist[j + 1][0]
                if c < best:
                    best, best_j = c, j
        cycle_cost[s] = best
        cycle_end[s] = best_j

    def rebuild_path(s: int, j: int) -> tuple[int, ...]:
        # keep the dp direction: reversing legs reorders the float sum
        seq = []
        while j != -1:
            seq.append(j)
            pj = parent[s][j]
            s &= ~(1 << j)
            j = pj
        seq.reverse()
        return tuple(seq)

    # Partition DP anchored at the lowest unassigned house; candidates are
    # compared by (cost, n_routes, route tuple) for a deterministic optimum.
    best_at: dict[int, tuple[float, int, tuple[tuple[int, ...], ...]]] = {0: (0.0, 0, ())}

    def solve(s: int) -> tuple[float, int, tuple[tuple[int, ...], ...]]:
        hit = best_at.get(s)
        if hit is not None:
            return hit
        low = (s & -s).bit_length() - 1
        rest = s & ~(1 << low)
        best = None
        t = rest
        while True:
            block = t | (1 << low)
            if cycle_cost[block] != NO:
                sub_cost, sub_k, sub_routes = solve(s & ~block)
                cand_cost = cycle_cost[block] + sub_cost
                if best is None or cand_cost < best[0]:
                    route = rebuild_path(block, cycle_end[block])
                    cand = (cand_cost, sub_k + 1, tuple(sorted((route,) + sub_routes)))
                    best = cand
                elif cand_cost == best[0]:
                    route = rebuild_path(block, cycle_end[block])
                    cand = (cand_cost, sub_k + 1, tuple(sorted((route,) + sub_routes)))
                    if cand[1:] < best[1:]:
                        best = cand
            if t == 0:
                break
            t = (t - 1) & rest
        assert best is not None  # capacity >= max demand guarantees singletons
        best_at[s] = best
        return best

    _, _, route_tuples = solve(full)
    routes = tuple(make_route(v, inst) for v in route_tuples)
    return FleetPlan(routes=routes, instance_ref=inst.base.name, capacity=capacity)


def split_parts(inst: EvacInstance, capacity: int) -> list[EvacInstance]:
    """Decompose an instance whose demands can exceed the vehicle capacity.

    Part i keeps every house with remaining demand, carrying
    min(remaining, capacity) of it; parts repeat until nothing remains.
    Coordinates pass through untouched, so parts of an already-normalized
    base stay directly comparable. Per-house demand sums over the parts
    equal the original demands.
    """
    if capacity < 1:
        raise DemandExceedsCapacity("capacity must be >= 1")
    if max(inst.demands) <= capacity:
        return [inst]
    parts: list[EvacInstance] = []
    remaining = list(inst.demands)
    part_no = 1
    while any(r > 0 for r in remaining):
        keep = [i for i, r in enumerate(remaining) if r > 0]
        part = replace(
            inst,
            name=f"{inst.name}-part{part_no}",
            houses=tuple(inst.houses[i] for i in keep),
            demands=tuple(min(remaining[i], capacity) for i in keep),
        )
        parts.append(part)
        for i in keep:
            remaining[i] -= min(remaining[i], capacity)
        part_no += 1
    return parts


def people_within_window(
    plan: FleetPlan, per_route_hours: list[float], window_hours: float
) -> int:
    """People evacuated by complete routes whose cumulative time fits the window."""
    if window_hours <= 0:
        raise SolverError("window_hours must be positive")
    total = 0.0
    people = 0
    for route, hours in zip(plan.routes, per_route_hours):
        total += hours
        if total > window_hours:
            break
        people += route.picked_up
    return people


def plan_to_dict(plan: FleetPlan, inst: NormalizedInstance | None = None) -> dict:
    """JSON-ready form with stable field names; includes geometry when the
    instance is supplied so a plan file is renderable on its own."""
    out = {
        "routes": [
            {
                "visits": list(r.visits),
                "picked_up": r.picked_up,
                "length_km": r.length_km,
                "time_hours": r.time_hours,
            }
            for r in plan.routes
        ],
        "capacity": plan.capacity,
        "instance": plan.instance_ref,
    }
    if inst is not None:
        out["geometry"] = {
            "depot": list(inst.base.depot),
            "houses": [list(h) for h in inst.base.houses],
            "scale_km_per_unit": inst.scale_km_per_unit,
        }
    return out


def plan_from_dict(data: dict) -> FleetPlan:
    routes = tuple(
        Route(
            visits=tuple(r["visits"]),
            picked_up=int(r["picked_up"]),
            length_km=float(r["length_km"]),
            time_hours=None if r.get("time_hours") is None else float(r["time_hours"]),
        )
        for r in data["routes"]
    )
    return FleetPlan(routes=routes, instance_ref=data["instance"], capacity=int(data["capacity"]))


def plan_to_json(plan: FleetPlan, inst: NormalizedInstance | None = None) -> str:
    return json.dumps(plan_to_dict(plan, inst), indent=2, sort_keys=True)
