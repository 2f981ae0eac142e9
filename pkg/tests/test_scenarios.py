import math

import pytest
from hypothesis import given, strategies as st

from evacroute.instances import normalize
from evacroute.scenarios import (
    DivisionByZero,
    ScenarioConfig,
    ScenarioError,
    ScenarioResult,
    TimelineClass,
    classify_time,
    comparison_csv,
    comparison_rows,
    estimate_fleet,
    pct_change_routes,
    pct_change_time,
    results_csv,
    run_grid,
    run_scenario,
)
from evacroute.solver import Route
from conftest import DEMAND_SEED

CFG = ScenarioConfig()


class TestClassify:
    @pytest.mark.parametrize("hours,expected", [
        (23.9, TimelineClass.SATISFACTORY),
        (23.999, TimelineClass.SATISFACTORY),
        (24.0, TimelineClass.BORDERLINE),
        (42.0, TimelineClass.BORDERLINE),
        (42.0001, TimelineClass.NOT_ALLOWED),
        (42.001, TimelineClass.NOT_ALLOWED),
    ])
    def test_boundaries(self, hours, expected):
        assert classify_time(hours, CFG) is expected

    @given(st.floats(0, 200), st.floats(0, 200))
    def test_monotone(self, t1, t2):
        lo, hi = sorted((t1, t2))
        assert classify_time(lo, CFG) <= classify_time(hi, CFG)

    def test_negative_rejected(self):
        with pytest.raises(ScenarioError):
            classify_time(-1.0, CFG)


def result_with(per_route) -> ScenarioResult:
    return ScenarioResult(
        dataset="d", houses=len(per_route), population=sum(r.picked_up for r in per_route),
        capacity=64, transit_hours=0.0, solver="sweep",
        total_hours=sum(r.time_hours for r in per_route), n_routes=len(per_route),
        timeline_class=TimelineClass.SATISFACTORY, vehicles_needed=None,
        beyond_window=False, per_route=tuple(per_route), n_parts=1, seed=0,
    )


def routes_of(loads_hours):
    return [
        Route(visits=(i,), picked_up=load, length_km=1.0, time_hours=h)
        for i, (load, h) in enumerate(loads_hours)
    ]


class TestEstimateFleet:
    def test_full_evacuation_168_people(self):
        # four complete routes, 30 h total, 168 people
        result = result_with(routes_of([(42, 7.5)] * 4))
        assert estimate_fleet(result, CFG) == 24  # ceil(4000/168)

    def test_beyond_window(self):
        result = result_with(routes_of([(30, 50.0)]))
        assert estimate_fleet(result, CFG) is None

    def test_whole_registry_in_one_vehicle(self):
        result = result_with(routes_of([(4000, 10.0)]))
        assert estimate_fleet(result, CFG) == 1

    def test_antitone_in_throughput(self):
        previous = None
        for people in (50, 100, 168, 500, 4000):
            result = result_with(routes_of([(people, 10.0)]))
            fleet = estimate_fleet(result, CFG)
            if previous is not None:
                assert fleet <= previous
            previous = fleet


class TestMetrics:
    def test_identities(self):
        assert pct_change_time(10, 10) == 0.0
        assert pct_change_routes(7, 7) == 0.0

    def test_hand_values(self):
        assert pct_change_time(8, 10) == -20.0
        assert pct_change_routes(11, 10) == 10.0

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            pct_change_time(5, 0)
        with pytest.raises(DivisionByZero):
            pct_change_routes(5, 0)


class TestRunScenario:
    def test_split_cell_carries_part_count(self, benchmark_sets):
        name, inst = benchmark_sets[0]
        assert max(inst.demands) > 2  # at the recorded seed
        result = run_scenario(name, inst, ScenarioConfig(capacity=2), seed=DEMAND_SEED)
        assert result.n_parts == 2
        assert result.n_routes == len(result.per_route)
        assert not result.failed

    def test_total_consistent_with_routes(self, benchmark_sets):
        name, inst = benchmark_sets[1]
        result = run_scenario(name, inst, ScenarioConfig(capacity=16, transit_hours=0.5))
        assert result.total_hours == pytest.approx(
            math.fsum(r.time_hours for r in result.per_route), rel=1e-12
        )
        assert result.timeline_class is classify_time(result.total_hours, CFG)


@pytest.fixture(scope="module")
def small_rows(benchmark_sets):
    return run_grid(
        benchmark_sets[:1], capacities=(16, 8), transits=(0.0, 2.0),
        solvers=("sweep",), demand_seed=DEMAND_SEED, max_workers=1,
    )


class TestRunGrid:
    def test_cell_count_and_order(self, small_rows):
        assert len(small_rows) == 4
        keys = [(r.capacity, r.transit_hours) for r in small_rows]
        assert keys == sorted(keys)

    def test_route_count_lower_bound(self, small_rows):
        for r in small_rows:
            assert r.n_routes >= math.ceil(r.population / r.capacity)

    def test_transit_linearity_across_cells(self, small_rows):
        by_cap = {}
        for r in small_rows:
            by_cap.setdefault(r.capacity, {})[r.transit_hours] = r
        for cap, cells in by_cap.items():
            base, shifted = cells[0.0], cells[2.0]
            assert shifted.n_routes == base.n_routes
            assert abs(shifted.total_hours - (base.total_hours + 2.0 * base.n_routes)) < 1e-12

    def test_failed_cell_marked_not_fatal(self, benchmark_sets):
        rows = run_grid(
            benchmark_sets[:1], capacities=(16,), transits=(0.0,),
            solvers=("sweep", "exact"), demand_seed=DEMAND_SEED, max_workers=1,
        )
        by_solver = {r.solver: r for r in rows}
        assert not by_solver["sweep"].failed
        assert by_solver["exact"].failed  # 20 houses > exact guard
        assert "TooLarge" in by_solver["exact"].error

    def test_csv_shapes_and_determinism(self, small_rows, benchmark_sets):
        csv1 = results_csv(small_rows)
        lines = csv1.strip().splitlines()
        assert lines[0] == ("dataset,houses,population,capacity,transit_hours,solver,"
                            "total_hours,n_routes,timeline_class,vehicles_needed,seed,"
                            "checkpoint_hash")
        assert len(lines) == 5
        rerun = run_grid(
            benchmark_sets[:1], capacities=(16, 8), transits=(0.0, 2.0),
            solvers=("sweep",), demand_seed=DEMAND_SEED, max_workers=2,
        )
        assert results_csv(rerun) == csv1

    def test_comparison_rows(self, benchmark_sets, small_policy):
        rows = run_grid(
            benchmark_sets[:1], capacities=(16,), transits=(0.0,),
            solvers=("sweep", "neural"), policy=small_policy,
            demand_seed=DEMAND_SEED, checkpoint_hash="random:5", max_workers=1,
        )
        comps = comparison_rows(rows)
        assert len(comps) == 1
        pair = {r.solver: r for r in rows}
        expected = pct_change_time(pair["neural"].total_hours, pair["sweep"].total_hours)
        assert comps[0]["pct_change_time"] == expected
        csv = comparison_csv(rows)
        assert csv.splitlines()[0] == "dataset,capacity,transit_hours,pct_change_time,pct_change_routes"
