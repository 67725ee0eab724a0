import itertools

import pytest

from vaxopt.instance import instance_from_dict
from vaxopt.model import LinExpr, Model, quicksum
from vaxopt import routing, solve
from vaxopt.scm import BuilderError


def route_inst(n, caps=None, vehicles=1, travel=None, service=1.0,
               demands=None):
    stops = [f"R{i}" for i in range(1, n + 1)]
    nodes = ["0"] + stops
    if travel is None:
        travel = {}
        for i, a in enumerate(nodes):
            for j, b in enumerate(nodes):
                if a != b:
                    travel[(a, b)] = float(abs(i - j) + 1)
    demands = demands or {s: 5.0 for s in stops}
    caps = caps or [100.0] * vehicles
    doc = {
        "time": {"horizon": 1},
        "regions": nodes,
        "groups": ["g1"],
        "vehicles": [f"H{i}" for i in range(1, vehicles + 1)],
        "vaccines": [{"id": "p1"}],
        "capacities": {"vehicle": [
            {"vehicle": f"H{i+1}", "value": caps[i]}
            for i in range(vehicles)]},
        "demand": {"by_region": [
            {"region": s, "group": "g1", "value": d}
            for s, d in demands.items()]},
        "logistics": {
            "service_time": [{"region": s, "value": service} for s in stops],
            "travel_time": [{"from": a, "to": b, "value": v}
                            for (a, b), v in travel.items()],
        },
    }
    return instance_from_dict(doc)


def exhaustive_vrp(inst):
    """Ground truth: cheapest cover of all stops by <= |H| depot tours,
    with stop-to-vehicle packing feasible under capacities."""
    stops = [r for r in inst.network.regions if r != "0"]
    caps = [inst.catalog.vehicle_capacity.get(h, float("inf"))
            for h in inst.network.vehicles]
    dem = {r: sum(v for (rr, _g), v in
                  inst.catalog.demand_by_region.items() if rr == r)
           for r in stops}

    def packing_ok():
        for assign in itertools.product(range(len(caps)), repeat=len(stops)):
            loads = [0.0] * len(caps)
            for s, h in zip(stops, assign):
                loads[h] += dem[s]
            if all(l <= c + 1e-9 for l, c in zip(loads, caps)):
                return True
        return False

    if not packing_ok():
        return None

    def tour_cost(order):
        cost = 0.0
        prev = "0"
        for r in order:
            cost += inst.catalog.travel_time[(prev, r)]
            prev = r
        cost += inst.catalog.travel_time[(prev, "0")]
        return cost

    best = None
    n_veh = len(caps)
    for perm in itertools.permutations(stops):
        # split the permutation into at most n_veh consecutive tours
        for size in range(min(n_veh, len(stops))):
            for cuts in itertools.combinations(range(1, len(stops)), size):
                pieces = []
                prev = 0
                for c in (*cuts, len(stops)):
                    if c > prev:
                        pieces.append(perm[prev:c])
                    prev = c
                cost = sum(tour_cost(p) for p in pieces)
                if best is None or cost < best - 1e-12:
                    best = cost
    return best


@pytest.mark.parametrize("subtour", ["mtz", "dfj_lazy"])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_vrp_matches_permutation_enumeration(n, subtour):
    inst = route_inst(n)
    want = exhaustive_vrp(inst)
    m = Model()
    routing.build_vrp(m, inst, subtour)
    sol = routing.solve_routing(m, inst)
    assert sol.status == solve.OPTIMAL
    assert sol.objective == pytest.approx(want, abs=1e-6)


def test_vrp_formulations_agree_two_vehicles():
    inst = route_inst(4, vehicles=2, caps=[12.0, 12.0],
                      demands={"R1": 5, "R2": 5, "R3": 5, "R4": 5})
    want = exhaustive_vrp(inst)
    values = []
    for mode in ("mtz", "dfj_lazy"):
        m = Model()
        routing.build_vrp(m, inst, mode)
        sol = routing.solve_routing(m, inst)
        assert sol.status == solve.OPTIMAL
        values.append(sol.objective)
    assert values[0] == pytest.approx(values[1], abs=1e-6)
    assert values[0] == pytest.approx(want, abs=1e-6)


def test_vrp_capacity_below_single_region_infeasible():
    inst = route_inst(2, caps=[3.0], demands={"R1": 5.0, "R2": 2.0})
    m = Model()
    routing.build_vrp(m, inst, "mtz")
    sol = routing.solve_routing(m, inst)
    assert sol.status == solve.INFEASIBLE


def test_vrp_zero_travel_times_collapse_start_times():
    n = 3
    stops = [f"R{i}" for i in range(1, n + 1)]
    travel = {(a, b): 0.0 for a in ["0"] + stops for b in ["0"] + stops
              if a != b}
    inst = route_inst(n, travel=travel, service=0.0)
    m = Model()
    routing.build_vrp(m, inst, "mtz")
    sol = routing.solve_routing(m, inst)
    assert sol.status == solve.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    # zero separations: collapsing every start time to 0 stays feasible
    collapsed = dict(sol.values)
    for v in m.family("start_time"):
        collapsed[v] = 0.0
    assert max(c.residual(collapsed) for c in m.constraints) <= 1e-9


def test_vrp_no_depot_free_cycles_and_loads_within_caps():
    inst = route_inst(5, vehicles=2, caps=[15.0, 15.0])
    m = Model()
    routing.build_vrp(m, inst, "dfj_lazy")
    sol = routing.solve_routing(m, inst)
    assert sol.status == solve.OPTIMAL
    assert routing.find_subtours(m, sol.values) == []
    # post-solve audit: per-vehicle load within capacity
    loads = {}
    for v in m.family("veh_assign"):
        r, h = v.indices
        if sol.values[v] > 0.5:
            loads[h] = loads.get(h, 0.0) + 5.0
    for h, load in loads.items():
        assert load <= inst.catalog.vehicle_capacity[h] + 1e-9


def test_vrp_start_times_chain_along_tours():
    inst = route_inst(3)
    m = Model()
    routing.build_vrp(m, inst, "mtz")
    sol = routing.solve_routing(m, inst)
    arcs = {(v.indices[0], v.indices[1]) for v in m.family("arc")
            if sol.values[v] > 0.5}
    tt = inst.catalog.travel_time
    for a, b in arcs:
        if b == "0":
            continue
        t_b = sol.values[m.var("start_time", (b,))]
        t_a = 0.0 if a == "0" else sol.values[m.var("start_time", (a,))]
        svc = inst.catalog.service_time.get(a, 0.0)
        assert t_b >= t_a + tt[(a, b)] + svc - 1e-6


def test_vrp_requires_depot():
    doc = {"time": {"horizon": 1}, "regions": ["R1", "R2"],
           "vehicles": ["H1"], "groups": ["g1"]}
    inst = instance_from_dict(doc)
    with pytest.raises(BuilderError, match="depot"):
        routing.build_vrp(Model(), inst, "mtz")


def test_vrp_unknown_subtour_mode():
    inst = route_inst(2)
    with pytest.raises(BuilderError, match="subtour"):
        routing.build_vrp(Model(), inst, "nope")


def test_route_report_lists_visits(load, tmp_path):
    inst = load("routing.json")
    m = Model()
    routing.build_vrp(m, inst, "dfj_lazy")
    sol = routing.solve_routing(m, inst)
    rows = routing.route_report(m, sol, inst)
    assert sorted(r["region"] for r in rows) == ["R1", "R2", "R3", "R4"]
    path = tmp_path / "routes.csv"
    routing.route_report_csv(rows, str(path))
    assert path.read_text().startswith("vehicle,order,region,arrival,load")


# -- selective routing --------------------------------------------------------------


def selective_best(inst, budget):
    """Enumerate visit subsets and visit orders within the time budget."""
    stops = [r for r in inst.network.regions if r != "0"]
    dem = {r: sum(v for (rr, _g), v in
                  inst.catalog.demand_by_region.items() if rr == r)
           for r in stops}
    svc = {r: inst.catalog.service_time.get(r, 0.0) for r in stops}
    tt = inst.catalog.travel_time
    best = 0.0
    for k in range(1, len(stops) + 1):
        for subset in itertools.combinations(stops, k):
            for order in itertools.permutations(subset):
                time = sum(svc[r] for r in order)
                prev = "0"
                for r in order:
                    time += tt[(prev, r)]
                    prev = r
                time += tt[(prev, "0")]
                if time <= budget + 1e-9:
                    best = max(best, sum(dem[r] for r in subset))
    return best


def test_selective_rejects_nonpositive_budget():
    inst = route_inst(2)
    with pytest.raises(BuilderError, match="budget"):
        routing.build_selective_routing(Model(), inst, 0.0)


def test_selective_tiny_budget_visits_nothing():
    inst = route_inst(3)
    m = Model()
    routing.build_selective_routing(m, inst, 0.5)
    sol = solve.solve_milp(m)
    assert sol.status == solve.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_selective_budget_for_two_matches_enumeration():
    inst = route_inst(3, demands={"R1": 10.0, "R2": 12.0, "R3": 8.0})
    budget = 8.0
    want = selective_best(inst, budget)
    m = Model()
    routing.build_selective_routing(m, inst, budget)
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(want, abs=1e-6)
    assert 0.0 < want < 30.0  # the budget admits some but not all stops


def test_selective_ample_budget_visits_all():
    inst = route_inst(3)
    m = Model()
    routing.build_selective_routing(m, inst, 1000.0)
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(15.0, abs=1e-6)
    for v in m.family("visit"):
        assert sol.values[v] == pytest.approx(1.0)
