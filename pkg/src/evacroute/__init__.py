"""Social-distanced evacuation routing toolkit.

Models neighborhood evacuation as a capacitated vehicle routing problem
and evaluates it against the 24 h / 42 h pickup timeline across vehicle
capacities, neighborhood sizes, and per-route transit times.
"""

from .instances import (
    DemandModel,
    EvacInstance,
    InstanceError,
    NormalizedInstance,
    manhattan_km,
    normalize,
    parse_cvrplib,
    regenerate_demands,
    serialize_cvrplib,
    truncate_instance,
)
from .solver import (
    FleetPlan,
    Route,
    SolverError,
    TimeModel,
    ValidationReport,
    attach_times,
    evaluate_time,
    exact_solve,
    people_within_window,
    split_parts,
    sweep_solve,
    validate,
)
from .scenarios import (
    ScenarioConfig,
    ScenarioResult,
    TimelineClass,
    classify_time,
    estimate_fleet,
    pct_change_routes,
    pct_change_time,
    run_grid,
    run_scenario,
)

__version__ = "0.1.0"
__all__ = [
    "DemandModel",
    "EvacInstance",
    "FleetPlan",
    "InstanceError",
    "NormalizedInstance",
    "Route",
    "ScenarioConfig",
    "ScenarioResult",
    "SolverError",
    "TimeModel",
    "TimelineClass",
    "ValidationReport",
    "attach_times",
    "classify_time",
    "estimate_fleet",
    "evaluate_time",
    "exact_solve",
    "manhattan_km",
    "normalize",
    "parse_cvrplib",
    "pct_change_routes",
    "pct_change_time",
    "people_within_window",
    "regenerate_demands",
    "run_grid",
    "run_scenario",
    "serialize_cvrplib",
    "split_parts",
    "sweep_solve",
    "truncate_instance",
    "validate",
]
