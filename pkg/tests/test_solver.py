import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evacroute.instances import EvacInstance, NormalizedInstance
from evacroute.solver import (
    DemandExceedsCapacity,
    FleetPlan,
    InvalidPlan,
    Route,
    TimeModel,
    TooLarge,
    attach_times,
    evaluate_time,
    exact_solve,
    make_route,
    people_within_window,
    plan_from_dict,
    plan_to_dict,
    split_parts,
    sweep_solve,
    validate,
)
from conftest import random_norm_instance
from oracles import naive_optimum, replay_cost


def plan_of(norm, visit_lists, capacity):
    routes = tuple(make_route(v, norm) for v in visit_lists)
    return FleetPlan(routes=routes, instance_ref=norm.base.name, capacity=capacity)


class TestValidate:
    def test_feasible(self, tiny_norm):
        plan = plan_of(tiny_norm, [[0, 1], [2]], 4)
        assert validate(plan, tiny_norm.base, 4).ok

    def test_missing_house(self, tiny_norm):
        plan = plan_of(tiny_norm, [[0, 1]], 4)
        report = validate(plan, tiny_norm.base, 4)
        kinds = [(v.kind, v.house) for v in report.violations]
        assert ("MissingHouse", 2) in kinds

    def test_capacity_exceeded(self):
        # demands packed to sum 17 against capacity 16
        inst = EvacInstance(
            name="x", depot=(0, 0),
            houses=((0.1, 0), (0.2, 0), (0.3, 0), (0.4, 0), (0.5, 0)),
            demands=(4, 4, 4, 4, 1),
        )
        norm = NormalizedInstance(base=inst, scale_km_per_unit=3.0)
        plan = plan_of(norm, [[0, 1, 2, 3, 4]], 16)
        assert plan.routes[0].picked_up == 17
        report = validate(plan, inst, 16)
        bad = [v for v in report.violations if v.kind == "CapacityExceeded"]
        assert len(bad) == 1 and "17" in bad[0].message and "16" in bad[0].message

    def test_duplicate_and_empty_and_range(self, tiny_norm):
        routes = (
            Route(visits=(0, 0), picked_up=4, length_km=1.0),
            Route(visits=(), picked_up=0, length_km=0.0),
            Route(visits=(1, 2, 7), picked_up=4, length_km=1.0),
        )
        plan = FleetPlan(routes=routes, instance_ref="tiny", capacity=64)
        kinds = {v.kind for v in validate(plan, tiny_norm.base, 64).violations}
        assert {"DuplicateVisit", "EmptyRoute", "IndexOutOfRange"} <= kinds

    def test_cross_route_duplicate(self, tiny_norm):
        plan = plan_of(tiny_norm, [[0, 1], [1, 2]], 6)
        kinds = {v.kind for v in validate(plan, tiny_norm.base, 6).violations}
        assert "DuplicateVisit" in kinds


class TestEvaluateTime:
    def test_single_route_hand_value(self):
        # normalized tour length 1.0: depot (0,0) -> house (0.25,0.25) and back
        inst = EvacInstance(name="x", depot=(0, 0), houses=((0.25, 0.25),), demands=(1,))
        norm = NormalizedInstance(base=inst, scale_km_per_unit=3.0)
        plan = plan_of(norm, [[0]], 4)
        total, per_route = evaluate_time(plan, norm, TimeModel(8.0, 0.5))
        assert total == pytest.approx(3 / 8 + 0.5)
        assert per_route == [pytest.approx(0.875)]

    def test_two_routes_hand_value(self):
        # lengths 0.5 and 0.25 normalized; side 3 km, speed 8, no transit
        inst = EvacInstance(
            name="x", depot=(0, 0), houses=((0.125, 0.125), (0.0625, 0.0625)), demands=(1, 1)
        )
        norm = NormalizedInstance(base=inst, scale_km_per_unit=3.0)
        plan = plan_of(norm, [[0], [1]], 4)
        total, _ = evaluate_time(plan, norm, TimeModel(8.0, 0.0))
        assert total == pytest.approx((1.5 + 0.75) / 8)
        assert total == pytest.approx(0.28125)

    def test_transit_linearity_exact(self, benchmark_sets):
        from evacroute.instances import normalize

        for _, inst in benchmark_sets[:2]:
            norm = normalize(inst)
            plan = sweep_solve(norm, 16)
            base, _ = evaluate_time(plan, norm, TimeModel(8.0, 0.0))
            for t in (0.5, 1.0, 2.0):
                total, _ = evaluate_time(plan, norm, TimeModel(8.0, t))
                assert total == base + t * plan.n_routes  # exact, not approx
                assert abs((total - base) - t * plan.n_routes) < 1e-12

    def test_invalid_plan_raises(self, tiny_norm):
        plan = plan_of(tiny_norm, [[0]], 4)
        with pytest.raises(InvalidPlan):
            evaluate_time(plan, tiny_norm, TimeModel())

    def test_route_length_matches_manhattan(self, tiny_norm):
        plan = plan_of(tiny_norm, [[0, 1, 2]], 6)
        r = plan.routes[0]
        # depot (.5,.5) -> (.6,.5) -> (.5,.6) -> (.4,.5) -> depot, x3 km
        legs = (0.1 + (0.1 + 0.1) + (0.1 + 0.1) + 0.1) * 3
        assert r.length_km == pytest.approx(legs, abs=1e-9)


class TestSweep:
    def test_hand_trace(self, tiny_norm):
        plan = sweep_solve(tiny_norm, 4)
        assert [list(r.visits) for r in plan.routes] == [[0, 1], [2]]

    def test_single_house(self):
        inst = EvacInstance(name="x", depot=(0, 0), houses=((1, 1),), demands=(2,))
        plan = sweep_solve(NormalizedInstance(base=inst, scale_km_per_unit=3.0), 4)
        assert [list(r.visits) for r in plan.routes] == [[0]]

    def test_capacity_covers_everything(self, tiny_norm):
        plan = sweep_solve(tiny_norm, 100)
        assert plan.n_routes == 1
        assert list(plan.routes[0].visits) == [0, 1, 2]  # angular order

    def test_start_angle_option(self, tiny_norm):
        # start at 90 degrees: sweep begins at house 1 (straight up)
        plan = sweep_solve(tiny_norm, 4, start_angle=math.pi / 2)
        assert [list(r.visits) for r in plan.routes] == [[1, 2], [0]]

    def test_angle_tie_broken_by_radius(self):
        inst = EvacInstance(
            name="x", depot=(0, 0), houses=((0.8, 0.0), (0.4, 0.0)), demands=(1, 1)
        )
        plan = sweep_solve(NormalizedInstance(base=inst, scale_km_per_unit=3.0), 4)
        assert list(plan.routes[0].visits) == [1, 0]  # nearer first

    def test_demand_exceeds_capacity(self, tiny_norm):
        with pytest.raises(DemandExceedsCapacity):
            sweep_solve(tiny_norm, 1)

    def test_deterministic(self, benchmark_sets):
        from evacroute.instances import normalize

        norm = normalize(benchmark_sets[1][1])
        assert sweep_solve(norm, 8) == sweep_solve(norm, 8)


class TestExact:
    def test_single_house_forced(self):
        inst = EvacInstance(name="x", depot=(0, 0), houses=((0.3, 0.4),), demands=(2,))
        norm = NormalizedInstance(base=inst, scale_km_per_unit=3.0)
        plan = exact_solve(norm, 4)
        assert [list(r.visits) for r in plan.routes] == [[0]]
        assert plan.routes[0].length_km == pytest.approx(2 * 0.7 * 3)

    def test_combining_beats_out_and_back(self):
        inst = EvacInstance(
            name="x", depot=(0, 0), houses=((0.5, 0.0), (0.6, 0.0)), demands=(1, 1)
        )
        norm = NormalizedInstance(base=inst, scale_km_per_unit=3.0)
        plan = exact_solve(norm, 4)
        assert plan.n_routes == 1
        solo = plan_of(norm, [[0], [1]], 4)
        assert plan.total_length_km <= solo.total_length_km

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(17)
        for trial in range(30):
            n = int(rng.integers(2, 8))
            norm = random_norm_instance(rng, n)
            total = sum(norm.base.demands)
            capacity = int(rng.integers(max(norm.base.demands), total + 2))
            plan = exact_solve(norm, capacity)
            assert validate(plan, norm.base, capacity).ok
            assert replay_cost(plan, norm) == naive_optimum(norm, capacity)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        norm = random_norm_instance(rng, 6)
        assert exact_solve(norm, 8) == exact_solve(norm, 8)

    def test_too_large(self):
        rng = np.random.default_rng(1)
        norm = random_norm_instance(rng, 11)
        with pytest.raises(TooLarge):
            exact_solve(norm, 64)

    def test_demand_exceeds_capacity(self, tiny_norm):
        with pytest.raises(DemandExceedsCapacity):
            exact_solve(tiny_norm, 1)


class TestSplitParts:
    def test_spec_example(self):
        inst = EvacInstance(
            name="x", depot=(0, 0), houses=((1, 0), (2, 0), (3, 0)), demands=(3, 1, 4)
        )
        parts = split_parts(inst, 2)
        assert len(parts) == 2
        assert parts[0].demands == (2, 1, 2)
        assert parts[1].houses == ((1.0, 0.0), (3.0, 0.0))
        assert parts[1].demands == (1, 2)

    def test_no_split_needed(self, tiny_norm):
        parts = split_parts(tiny_norm.base, 4)
        assert parts == [tiny_norm.base]

    def test_repeated_subtraction(self):
        inst = EvacInstance(name="x", depot=(0, 0), houses=((1, 1),), demands=(4,))
        parts = split_parts(inst, 1)
        assert len(parts) == 4
        assert all(p.demands == (1,) for p in parts)

    @given(st.lists(st.integers(1, 12), min_size=1, max_size=8), st.integers(1, 8))
    def test_conservation(self, demands, capacity):
        inst = EvacInstance(
            name="x", depot=(0, 0),
            houses=tuple((i + 1.0, 0.0) for i in range(len(demands))),
            demands=tuple(demands),
        )
        parts = split_parts(inst, capacity)
        totals = dict.fromkeys(inst.houses, 0)
        for part in parts:
            assert max(part.demands) <= capacity
            for house, d in zip(part.houses, part.demands):
                totals[house] += d
        assert [totals[h] for h in inst.houses] == list(demands)


class TestPeopleWithinWindow:
    def fleet(self, loads):
        routes = tuple(
            Route(visits=(i,), picked_up=load, length_km=1.0) for i, load in enumerate(loads)
        )
        return FleetPlan(routes=routes, instance_ref="x", capacity=64)

    def test_prefix_sum(self):
        plan = self.fleet([30, 30, 30, 30])
        # cumulative completion times 10, 20, 41, 43
        assert people_within_window(plan, [10, 10, 21, 2], 42) == 90

    def test_window_too_small(self):
        plan = self.fleet([30])
        assert people_within_window(plan, [50], 42) == 0

    def test_everything_fits(self):
        plan = self.fleet([10, 20])
        assert people_within_window(plan, [5, 5], 42) == 30


class TestPlanJson:
    def test_round_trip(self, tiny_norm):
        plan = attach_times(sweep_solve(tiny_norm, 4), tiny_norm, TimeModel(8.0, 0.5))
        doc = plan_to_dict(plan, tiny_norm)
        assert set(doc) == {"routes", "capacity", "instance", "geometry"}
        assert set(doc["routes"][0]) == {"visits", "picked_up", "length_km", "time_hours"}
        assert plan_from_dict(doc) == plan
