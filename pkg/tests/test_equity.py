import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaxopt.instance import instance_from_dict
from vaxopt.model import EQ, GE, LE, BINARY, LinExpr, Model, lin, quicksum
from vaxopt import equity, solve
from vaxopt.equity import (build_carbon_objective, build_deviation_equity,
                           build_maximin_satisfaction,
                           build_min_satisfaction_rate,
                           build_proportional_share, build_rawlsian,
                           build_social_welfare_ii,
                           epsilon_constraint_scalarize, gini, pareto_front,
                           pareto_sweep, register_regional_allocation,
                           social_welfare_ii_value)
from vaxopt.scm import BuilderError


def test_gini_exact_values():
    assert gini((0.5, 0.5)) == 0.0
    assert gini((1.0, 0.0)) == 0.5
    assert gini((0.3, 0.3, 0.3)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=2,
                max_size=6),
       st.floats(min_value=0.01, max_value=100.0))
def test_gini_scale_invariant(f, c):
    if sum(f) <= 0:
        return
    assert gini([c * x for x in f]) == pytest.approx(gini(f), abs=1e-12)


def test_gini_range_bound():
    for f in ((1, 0), (1, 0, 0), (5, 1, 0, 0)):
        assert 0.0 <= gini(f) <= 1.0 - 1.0 / len(f) + 1e-12


def test_gini_rejects_degenerate_input():
    with pytest.raises(ValueError):
        gini((0.0, 0.0))
    with pytest.raises(ValueError):
        gini((-1.0, 2.0))


def maximin_inst(d1, d2, horizon=1):
    return instance_from_dict({
        "time": {"horizon": horizon},
        "vaccination_centers": ["V1"],
        "groups": ["g1", "g2"],
        "vaccines": [{"id": "p1"}],
        "demand": {"by_group": [
            {"group": "g1", "vc": "V1", "vaccine": "p1", "t": 1, "value": d1},
            {"group": "g2", "vc": "V1", "vaccine": "p1", "t": 1, "value": d2},
        ]},
    })


def maximin_solve(d1, d2, supply):
    inst = maximin_inst(d1, d2)
    m = Model()
    build_maximin_satisfaction(m, inst)
    m.add_constr(quicksum(m.family("x_v_g")), LE, float(supply),
                 "test.supply")
    sol = solve.solve_milp(m)
    assert sol.status == solve.OPTIMAL
    return sol.objective


def test_maximin_matches_integer_enumeration():
    # supply 6 against demands (5, 10): enumerate integer allocations
    best = max(min(a / 5.0, b / 10.0)
               for a in range(7) for b in range(7) if a + b <= 6)
    assert best == pytest.approx(0.4)
    got = maximin_solve(5, 10, 6)
    # continuous allocation can do no better here than the integer pattern
    assert got == pytest.approx(0.4, abs=1e-6)


def test_maximin_full_supply_reaches_one():
    assert maximin_solve(5, 10, 15) == pytest.approx(1.0, abs=1e-6)


def test_maximin_single_group_is_plain_rate():
    inst = instance_from_dict({
        "time": {"horizon": 1},
        "vaccination_centers": ["V1"],
        "groups": ["g1"],
        "vaccines": [{"id": "p1"}],
        "demand": {"by_group": [
            {"group": "g1", "vc": "V1", "vaccine": "p1", "t": 1,
             "value": 8}]},
    })
    m = Model()
    build_maximin_satisfaction(m, inst)
    m.add_constr(quicksum(m.family("x_v_g")), LE, 6.0, "test.supply")
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(6.0 / 8.0, abs=1e-7)


def test_maximin_warns_on_zero_demand_cell():
    inst = maximin_inst(5, 0)
    with pytest.warns(UserWarning, match="zero demand"):
        build_maximin_satisfaction(Model(), inst)


def test_min_rate_zero_gamma_vacuous():
    inst = maximin_inst(5, 10)
    m = Model()
    build_min_satisfaction_rate(m, inst, gamma=0.0)
    m.add_objective("min", quicksum(m.family("x_v_g")))
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_min_rate_full_gamma_with_scarcity_infeasible():
    inst = maximin_inst(5, 10)
    m = Model()
    build_min_satisfaction_rate(m, inst, gamma=1.0)
    m.add_constr(quicksum(m.family("x_v_g")), LE, 6.0, "test.supply")
    m.add_objective("min", quicksum(m.family("x_v_g")))
    assert solve.solve_milp(m).status == solve.INFEASIBLE


def test_min_rate_half_gamma_matches_enumeration():
    # two cells of demand 10 each, supply 12, rate 0.5: feasible integer
    # allocations are exactly those giving every cell at least 5
    inst = maximin_inst(10, 10)
    feasible = {(a, b) for a in range(13) for b in range(13)
                if a + b <= 12 and a >= 5 and b >= 5}
    for (a, b) in [(5, 5), (6, 6), (5, 7), (4, 8), (12, 0)]:
        m = Model()
        build_min_satisfaction_rate(m, inst, gamma=0.5)
        m.add_constr(quicksum(m.family("x_v_g")), LE, 12.0, "test.supply")
        g1 = m.var("x_v_g", ("g1", "V1", "p1", 1))
        g2 = m.var("x_v_g", ("g2", "V1", "p1", 1))
        m.add_constr(LinExpr.term(g1), EQ, float(a), "pin.a")
        m.add_constr(LinExpr.term(g2), EQ, float(b), "pin.b")
        m.add_objective("min", LinExpr())
        got = solve.solve_lp(m).status == solve.OPTIMAL
        assert got == ((a, b) in feasible), (a, b)


def test_min_rate_with_assignment_routes_supply():
    inst = instance_from_dict({
        "time": {"horizon": 1},
        "manufacturers": ["M1"],
        "distribution_centers": ["D1"],
        "vaccination_centers": ["V1", "V2"],
        "groups": ["g1"],
        "vaccines": [{"id": "p1"}],
        "demand": {"by_group": [
            {"group": "g1", "vc": "V1", "vaccine": "p1", "t": 1, "value": 10},
            {"group": "g1", "vc": "V2", "vaccine": "p1", "t": 1, "value": 6},
        ]},
    })
    m = Model()
    build_min_satisfaction_rate(m, inst, gamma=0.5, with_assignment=True)
    for k in ("V1", "V2"):
        m.add_constr(LinExpr.term(m.var("assign_jk", ("D1", k))), EQ, 1.0,
                     f"pin[{k}]")
    m.add_objective("min", quicksum(m.family("x_md")))
    sol = solve.solve_milp(m)
    assert sol.status == solve.OPTIMAL
    # supply into D1 must cover half of the demand routed through it
    assert sol.objective == pytest.approx(0.5 * 16, abs=1e-6)


def test_min_rate_rejects_bad_gamma():
    with pytest.raises(BuilderError):
        build_min_satisfaction_rate(Model(), maximin_inst(1, 1), gamma=1.5)


# -- deviation equity ---------------------------------------------------------------


def deviation_inst(fair, demand, gamma=0.0):
    return instance_from_dict({
        "time": {"horizon": 1},
        "regions": ["R1"],
        "groups": ["g1"],
        "vaccines": [{"id": "p1"}],
        "demand": {"by_region": [{"region": "R1", "group": "g1",
                                  "value": demand}],
                   "min_satisfaction": gamma},
        "logistics": {"fair_share": [{"region": "R1", "group": "g1",
                                      "value": fair}],
                      "equity_weight": 0.5, "deviation_penalty": 10.0},
    })


def test_deviation_zero_when_fair_allocation_possible():
    inst = deviation_inst(fair=8, demand=10)
    m = Model()
    build_deviation_equity(m, inst)
    sol = solve.solve_milp(m)
    assert sol.status == solve.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-7)
    assert sum(sol.values[v] for v in m.family("x_v_r")) == \
        pytest.approx(8.0, abs=1e-6)


def test_deviation_under_allocation_penalized():
    inst = deviation_inst(fair=8, demand=10)
    m = Model()
    build_deviation_equity(m, inst)
    m.add_constr(quicksum(m.family("x_v_r")), LE, 6.0, "test.supply")
    sol = solve.solve_milp(m)
    dneg = sol.values[m.var("dev_neg", ("R1", "g1"))]
    assert dneg == pytest.approx(2.0, abs=1e-6)
    # penalty factor 10, weight 0.5, demand 10 -> 10 * 0.5 * 2 / 10 = 1
    assert sol.objective == pytest.approx(1.0, abs=1e-6)


def test_deviation_weight_zero_ignores_shortfall():
    inst = deviation_inst(fair=8, demand=10)
    m = Model()
    build_deviation_equity(m, inst, weight=0.0)
    m.add_constr(quicksum(m.family("x_v_r")), LE, 6.0, "test.supply")
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(0.0, abs=1e-7)


def test_deviation_rejects_zero_demand_cell():
    inst = deviation_inst(fair=0, demand=0)
    with pytest.raises(BuilderError, match="zero demand"):
        build_deviation_equity(Model(), inst)


# -- regional allocation objectives ----------------------------------------------------


def region_inst(regions=("R1", "R2"), pops=None):
    doc = {"time": {"horizon": 1}, "regions": list(regions),
           "groups": ["g1"], "vaccines": [{"id": "p1"}]}
    if pops:
        doc["demand"] = {"region_population": [
            {"region": r, "value": p} for r, p in pops.items()]}
    return instance_from_dict(doc)


def test_rawlsian_symmetric_split():
    inst = region_inst()
    m = Model()
    register_regional_allocation(m, inst, supply=10.0, caps={"R1": 8.0,
                                                             "R2": 8.0})
    build_rawlsian(m, inst)
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(5.0, abs=1e-7)


def test_rawlsian_respects_caps():
    inst = region_inst()
    m = Model()
    register_regional_allocation(m, inst, supply=10.0, caps={"R1": 3.0,
                                                             "R2": 9.0})
    build_rawlsian(m, inst)
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_rawlsian_needs_allocations():
    with pytest.raises(BuilderError):
        build_rawlsian(Model(), region_inst())


def test_proportional_share_tracks_population():
    inst = region_inst(pops={"R1": 300.0, "R2": 100.0})
    m = Model()
    register_regional_allocation(m, inst, supply=8.0)
    build_proportional_share(m, inst, slack=0.0)
    m.add_objective("max", quicksum(m.family("alloc_r")))
    sol = solve.solve_milp(m)
    assert sol.values[m.var("alloc_r", ("R1",))] == pytest.approx(6.0,
                                                                  abs=1e-6)
    assert sol.values[m.var("alloc_r", ("R2",))] == pytest.approx(2.0,
                                                                  abs=1e-6)


def test_social_welfare_single_segment_is_linear():
    inst = region_inst()
    m = Model()
    register_regional_allocation(m, inst, supply=5.0,
                                 caps={"R1": 10.0, "R2": 10.0})
    u = {"R1": 10.0, "R2": 10.0}
    build_social_welfare_ii(m, inst, u, segments=1)
    sol = solve.solve_milp(m)
    assert sol.status == solve.OPTIMAL
    # one chord over [0, 10]: q = 10 * shortfall; putting all supply in one
    # region maximizes total shortfall-chord value
    alloc = {r: sol.values[m.var("alloc_r", (r,))] for r in ("R1", "R2")}
    assert sum(alloc.values()) <= 5.0 + 1e-6


def test_social_welfare_exact_at_grid_points():
    inst = region_inst(regions=("R1",))
    m = Model()
    register_regional_allocation(m, inst, supply=10.0, caps={"R1": 10.0})
    u = {"R1": 8.0}
    build_social_welfare_ii(m, inst, u, segments=8)
    # pin the allocation on a grid point: shortfall 6, square exactly 36
    m.add_constr(LinExpr.term(m.var("alloc_r", ("R1",))), EQ, 2.0, "pin")
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(36.0, abs=1e-6)
    assert social_welfare_ii_value(m, sol, u) == pytest.approx(36.0,
                                                               abs=1e-6)


def test_social_welfare_overapproximates_square():
    inst = region_inst(regions=("R1",))
    m = Model()
    register_regional_allocation(m, inst, supply=10.0, caps={"R1": 10.0})
    u = {"R1": 8.0}
    build_social_welfare_ii(m, inst, u, segments=4)
    m.add_constr(LinExpr.term(m.var("alloc_r", ("R1",))), EQ, 3.0, "pin")
    sol = solve.solve_milp(m)
    exact = social_welfare_ii_value(m, sol, u)
    assert sol.objective >= exact - 1e-9


# -- carbon objectives -----------------------------------------------------------------


def carbon_inst():
    return instance_from_dict({
        "time": {"horizon": 1},
        "manufacturers": ["M1"],
        "distribution_centers": ["D1"],
        "vaccination_centers": ["V1"],
        "groups": ["g1"],
        "vaccines": [{"id": "p1"}],
        "costs": {"emission_facility": 2.5, "emission_transport": 0.5},
        "logistics": {"distance": [{"from": "D1", "to": "V1", "value": 3.0}]},
    })


def test_carbon_zero_when_idle():
    inst = carbon_inst()
    m = Model()
    m.add_var("y_dc", ("D1",), BINARY)
    m.add_var("z_vc", ("V1",), BINARY)
    m.add_var("x_dv", ("D1", "V1", "p1", 1))
    m.add_var("s_v_g", ("g1", "V1", "p1", 1))
    build_carbon_objective(m, inst)
    emission = next(o for o in m.objectives if o.name == "carbon_emission")
    assert emission.expr.value({}) == 0.0


def test_carbon_hand_computed():
    inst = carbon_inst()
    m = Model()
    y = m.add_var("y_dc", ("D1",), BINARY)
    z = m.add_var("z_vc", ("V1",), BINARY)
    x = m.add_var("x_dv", ("D1", "V1", "p1", 1))
    s = m.add_var("s_v_g", ("g1", "V1", "p1", 1))
    build_carbon_objective(m, inst)
    emission = next(o for o in m.objectives if o.name == "carbon_emission")
    shortage = next(o for o in m.objectives if o.name == "total_shortage")
    point = {y: 1.0, z: 1.0, x: 10.0, s: 4.0}
    assert emission.expr.value(point) == pytest.approx(2.5 * 2 + 0.5 * 30.0)
    assert shortage.expr.value(point) == pytest.approx(4.0)


# -- epsilon constraint -----------------------------------------------------------------


def biobjective_model():
    # coverage vs cost toy: pick projects with value and price
    m = Model()
    xs = [m.add_var(f"pick{i}", domain="binary") for i in range(4)]
    values = [10.0, 8.0, 5.0, 3.0]
    prices = [6.0, 5.0, 3.0, 1.0]
    m.add_objective("max", lin(*zip(values, xs)), "value")
    m.add_objective("min", lin(*zip(prices, xs)), "price")
    return m, xs, values, prices


def test_epsilon_nonbinding_equals_single_objective():
    m, xs, values, prices = biobjective_model()
    scal = epsilon_constraint_scalarize(m, "value", {"price": 100.0})
    sol = solve.solve_milp(scal)
    assert sol.objective == pytest.approx(sum(values), abs=1e-7)


def test_epsilon_sweep_yields_nondominated_points():
    m, *_ = biobjective_model()
    rows = pareto_sweep(m, "value", {"price": [0.0, 4.0, 8.0, 15.0]})
    front = pareto_front(rows, {"value": "max", "price": "min"})
    assert front
    # pairwise dominance audit: no front point dominates another
    for a in front:
        for b in front:
            if a is b:
                continue
            dominates = (a["objectives"]["value"] >=
                         b["objectives"]["value"] - 1e-6
                         and a["objectives"]["price"] <=
                         b["objectives"]["price"] + 1e-6
                         and (a["objectives"]["value"] >
                              b["objectives"]["value"] + 1e-6
                              or a["objectives"]["price"] <
                              b["objectives"]["price"] - 1e-6))
            assert not dominates


def test_epsilon_infeasible_bound_reports_infeasible():
    m, *_ = biobjective_model()
    scal = epsilon_constraint_scalarize(m, "price", {"value": 100.0})
    # maximizing-value bound of 100 is unattainable
    assert solve.solve_milp(scal).status == solve.INFEASIBLE


def test_epsilon_missing_bound_is_an_error():
    m, *_ = biobjective_model()
    with pytest.raises(BuilderError, match="bound missing"):
        epsilon_constraint_scalarize(m, "value", {})


def test_epsilon_unknown_objective():
    m, *_ = biobjective_model()
    with pytest.raises(BuilderError, match="unknown objective"):
        epsilon_constraint_scalarize(m, "welfare", {"price": 1.0})


def test_pareto_csv_written(tmp_path):
    m, *_ = biobjective_model()
    rows = pareto_sweep(m, "value", {"price": [2.0, 6.0]})
    path = tmp_path / "pareto.csv"
    equity.pareto_csv(rows, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "eps_price,price,value,status"
    assert len(lines) == 3
