import itertools
import math

import numpy as np
import pytest

from vaxopt.instance import instance_from_dict
from vaxopt import epi
from vaxopt.epi import (DEFAULT_HERD_CURVE, EpiParams, build_epi_embedding,
                        coverage_coefficient, herd_immunity_allocate,
                        initial_state_from_instance, params_from_instance,
                        simulate_delphi_v, trajectory_csv)


def simple_params(horizon, groups=("g1",), alpha=2e-4, beta=0.9,
                  branch=(0.05, 0.04, 0.06), detection=0.15):
    return EpiParams(
        beta=beta, alpha=alpha, gamma=[1.0] * horizon,
        progression_rate=0.2, detection_rate=detection, death_rate=0.05,
        undetected_rate={g: [branch[0]] * horizon for g in groups},
        hospitalized_rate={g: [branch[1]] * horizon for g in groups},
        quarantined_rate={g: [branch[2]] * horizon for g in groups},
        regions=["R1"], groups=list(groups))


def test_disease_free_equilibrium_is_constant():
    params = simple_params(8)
    init = {("R1", "g1", "S"): 250.0}
    state = simulate_delphi_v(params, init, {}, horizon=8)
    assert np.allclose(state.S[0, 0, :], 250.0)
    for name in ("E", "I", "U", "H", "Q", "D"):
        assert np.allclose(getattr(state, name), 0.0)


def test_zero_effectiveness_keeps_vaccinated_class_empty():
    params = simple_params(6, beta=0.0)
    init = {("R1", "g1", "S"): 100.0}
    plan = {("R1", "g1", t): 10.0 for t in range(1, 7)}
    state = simulate_delphi_v(params, init, plan, horizon=6)
    assert np.allclose(state.Sv[0, :], 0.0)
    assert np.allclose(state.S[0, 0, :], 100.0)  # no infections, no outflow


def test_population_conservation_per_step(load):
    inst = load("epi_t50.json")
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)
    state = simulate_delphi_v(params, init, {}, horizon=inst.horizon,
                              clip=False)
    assert state.clip_correction == 0.0
    pops = np.array([state.population(n) for n in range(len(state.times))])
    rel = np.abs(pops - pops[0]) / pops[0]
    assert rel.max() <= 1e-9


def _rk4_reference(inst, dt=0.01):
    """Independent high-order integrator, re-derived from the rate laws for
    the single-region single-group no-vaccination case."""
    blk = inst.epi
    T = inst.horizon
    alpha = blk["alpha"]
    gamma = blk["gamma"]
    if isinstance(gamma, (int, float)):
        gamma = [gamma] * T
    r_i = blk["progression_rate"]
    r_d = blk["detection_rate"]
    r_dth = blk["death_rate"]
    r_u = blk["undetected_rate"]["g1"]
    r_h = blk["hospitalized_rate"]["g1"]
    r_q = blk["quarantined_rate"]["g1"]
    init = {rec["compartment"]: rec["value"] for rec in blk["initial"]}
    y = [init.get(c, 0.0) for c in ("S", "E", "I", "U", "H", "Q", "D")]

    def deriv(y, t):
        S, E, I, U, H, Q, D = y
        force = alpha * gamma[min(int(t), T - 1)] * I
        return [
            -force * S,
            force * S - r_i * E,
            r_i * E - r_d * I,
            r_u * I - r_dth * U,
            r_h * I - r_dth * H,
            r_q * I - r_dth * Q,
            r_dth * (U + H + Q),
        ]

    steps_per_period = int(round(1.0 / dt))
    out = [list(y)]
    t = 0.0
    for _ in range(T * steps_per_period):
        k1 = deriv(y, t)
        k2 = deriv([a + dt / 2 * b for a, b in zip(y, k1)], t + dt / 2)
        k3 = deriv([a + dt / 2 * b for a, b in zip(y, k2)], t + dt / 2)
        k4 = deriv([a + dt * b for a, b in zip(y, k3)], t + dt)
        y = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
             for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        t += dt
        out.append(list(y))
    # sample at period boundaries
    return np.array(out[::steps_per_period])


def test_euler_tracks_rk4_reference(load):
    inst = load("epi_t50.json")
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)
    state = simulate_delphi_v(params, init, {}, horizon=inst.horizon, dt=1.0)
    ref = _rk4_reference(inst)
    i_euler = state.I[0, 0, :]
    i_ref = ref[:, 2]
    sup_err = np.max(np.abs(i_euler - i_ref))
    assert sup_err / np.max(np.abs(i_ref)) <= 0.02


def test_finer_steps_converge_to_rk4(load):
    inst = load("epi_t50.json")
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)
    ref = _rk4_reference(inst)[:, 2]
    errs = []
    for dt in (1.0, 0.5, 0.25):
        state = simulate_delphi_v(params, init, {}, horizon=inst.horizon,
                                  dt=dt)
        stride = int(round(1.0 / dt))
        errs.append(np.max(np.abs(state.I[0, 0, ::stride] - ref)))
    assert errs[0] > errs[1] > errs[2]


def test_negative_excursions_clipped_with_warning():
    params = simple_params(3, alpha=0.0, beta=1.0)
    init = {("R1", "g1", "S"): 5.0}
    plan = {("R1", "g1", 1): 50.0}  # vaccinate far beyond the pool
    with pytest.warns(UserWarning, match="clipped"):
        state = simulate_delphi_v(params, init, plan, horizon=3)
    assert state.clip_correction > 0.0
    assert np.all(state.S >= 0.0)


def test_vaccination_monotone_benefit(load):
    inst = load("epi.json")
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)
    deaths = []
    for scale in (0.0, 0.5, 1.0):
        plan = {(r, g, t): 20.0 * scale
                for r in params.regions for g in params.groups
                for t in range(1, inst.horizon + 1)}
        state = simulate_delphi_v(params, init, plan, horizon=inst.horizon)
        deaths.append(state.total_deaths())
    assert deaths[0] >= deaths[1] >= deaths[2]


def test_eligibility_tracks_susceptible_outflow():
    params = simple_params(4, alpha=0.0)
    init = {("R1", "g1", "S"): 100.0}
    plan = {("R1", "g1", 1): 10.0}
    state = simulate_delphi_v(params, init, plan, horizon=4)
    # with no infections: one vaccination period removes 2 * beta * V from
    # the eligible pool (effective vaccinations plus the S outflow itself)
    assert state.Sbar[0, 0, 1] == pytest.approx(100 - 2 * 0.9 * 10.0)


def test_trajectory_csv(tmp_path, load):
    inst = load("epi_t50.json")
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)
    state = simulate_delphi_v(params, init, {}, horizon=inst.horizon)
    path = tmp_path / "traj.csv"
    trajectory_csv(state, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "region,group,period,compartment,value"
    assert any(line.startswith("R1,g1,0,S,") for line in lines)
    assert any(",*," in line for line in lines)  # vaccinated track rows


# -- optimization embedding ------------------------------------------------------------


def test_embedding_zero_supply_matches_uncontrolled(load):
    inst = load("epi.json")
    for rec in inst.epi["vaccine_budget"]:
        rec["value"] = 0.0
    res = build_epi_embedding(inst)
    assert res["plan"] == {}
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)
    base = simulate_delphi_v(params, init, {}, horizon=inst.horizon)
    assert res["simulated_deaths"] == pytest.approx(base.total_deaths(),
                                                    abs=1e-9)


def test_embedding_unlimited_supply_front_loads():
    doc = {
        "time": {"horizon": 4},
        "regions": ["R1"],
        "groups": ["g1"],
        "epi": {
            "beta": 1.0, "alpha": 3e-4, "gamma": 1.0,
            "progression_rate": 0.2, "detection_rate": 0.15,
            "death_rate": 0.05,
            "undetected_rate": {"g1": 0.05},
            "hospitalized_rate": {"g1": 0.04},
            "quarantined_rate": {"g1": 0.06},
            "initial": [
                {"region": "R1", "group": "g1", "compartment": "S",
                 "value": 400},
                {"region": "R1", "group": "g1", "compartment": "E",
                 "value": 5},
                {"region": "R1", "group": "g1", "compartment": "I",
                 "value": 5}],
        },
    }
    inst = instance_from_dict(doc)
    res = build_epi_embedding(inst, supply={})
    # everyone eligible is vaccinated immediately
    assert res["plan"][("R1", "g1", 1)] == pytest.approx(400.0, abs=1e-4)
    assert res["converged"]
    assert res["optimizer_deaths"] == pytest.approx(res["simulated_deaths"],
                                                    abs=1e-4)


def test_embedding_converges_with_agreement(load):
    inst = load("epi.json")
    res = build_epi_embedding(inst, tol=1e-6)
    assert res["converged"]
    assert res["iterations"] <= 50
    assert res["optimizer_deaths"] == pytest.approx(
        res["simulated_deaths"], abs=1e-4)
    # supply is respected
    for t in range(1, inst.horizon + 1):
        spent = sum(v for (r, g, tt), v in res["plan"].items() if tt == t)
        assert spent <= 40.0 + 1e-6


def test_embedding_prioritizes_severe_group_vs_plan_enumeration():
    # two groups, one with a severe detected pathway; per-period budget
    # covers one group's worth of vaccination; enumerate all-or-nothing
    # plans (2^T) with the simulator as the oracle
    horizon = 6
    doc = {
        "time": {"horizon": horizon},
        "regions": ["R1"],
        "groups": ["lo", "hi"],
        "epi": {
            "beta": 0.9, "alpha": 3e-4, "gamma": 1.0,
            "progression_rate": 0.2, "detection_rate": 0.15,
            "death_rate": 0.05,
            "undetected_rate": {"lo": 0.01, "hi": 0.05},
            "hospitalized_rate": {"lo": 0.01, "hi": 0.04},
            "quarantined_rate": {"lo": 0.01, "hi": 0.06},
            "initial": [
                {"region": "R1", "group": "lo", "compartment": "S",
                 "value": 300},
                {"region": "R1", "group": "hi", "compartment": "S",
                 "value": 300},
                {"region": "R1", "group": "lo", "compartment": "E",
                 "value": 5},
                {"region": "R1", "group": "hi", "compartment": "E",
                 "value": 5},
                {"region": "R1", "group": "lo", "compartment": "I",
                 "value": 5},
                {"region": "R1", "group": "hi", "compartment": "I",
                 "value": 5}],
            "vaccine_budget": [{"t": t, "value": 60}
                               for t in range(1, horizon + 1)],
        },
    }
    inst = instance_from_dict(doc)
    params = params_from_instance(inst)
    init = initial_state_from_instance(inst)

    best_deaths, best_plan = math.inf, None
    for choice in itertools.product(("lo", "hi"), repeat=horizon):
        plan = {("R1", g, t): 60.0
                for t, g in enumerate(choice, start=1)}
        state = simulate_delphi_v(params, init, plan, horizon=horizon)
        if state.total_deaths() < best_deaths:
            best_deaths, best_plan = state.total_deaths(), choice
    # the all-or-nothing oracle prefers the severe group first
    assert best_plan[0] == "hi"

    res = build_epi_embedding(inst, tol=1e-6)
    # the richer (divisible) plan space can only improve on the oracle
    assert res["simulated_deaths"] <= best_deaths + 1e-6
    hi_total = sum(v for (r, g, t), v in res["plan"].items() if g == "hi")
    lo_total = sum(v for (r, g, t), v in res["plan"].items() if g == "lo")
    assert hi_total > lo_total


# -- herd immunity ---------------------------------------------------------------------


def test_herd_zero_curve_fills_budget():
    res = herd_immunity_allocate([(0.0, 0.0), (1.0, 0.0)], availability=50.0,
                                 susceptible={"R1": 60.0, "R2": 60.0},
                                 populations={"R1": 100.0, "R2": 100.0})
    filled = 100.0 * res["fractions"]["R1"] + 100.0 * res["fractions"]["R2"]
    assert filled == pytest.approx(50.0, abs=1e-6)
    assert res["value"] == pytest.approx(50.0, abs=1e-6)


def test_herd_symmetric_regions_split_equally():
    res = herd_immunity_allocate(DEFAULT_HERD_CURVE, availability=60.0,
                                 susceptible={"R1": 60.0, "R2": 60.0},
                                 populations={"R1": 100.0, "R2": 100.0})
    assert res["fractions"]["R1"] == pytest.approx(res["fractions"]["R2"],
                                                   abs=1e-6)
    assert res["fractions"]["R1"] == pytest.approx(0.3, abs=1e-6)


def _herd_value(pts, f):
    # piecewise-linear interpolation of the curve
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if f <= xs[0]:
        return ys[0]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if f <= x1:
            lam = (f - x0) / (x1 - x0)
            return y0 + lam * (y1 - y0)
    return ys[-1]


def test_herd_asymmetric_matches_grid_search():
    pts = ((0.0, 0.0), (0.3, 0.36), (0.7, 0.6), (1.0, 0.7))
    pops = {"A": 120.0, "B": 80.0}
    susc = {"A": 90.0, "B": 40.0}
    avail = 70.0
    res = herd_immunity_allocate(pts, avail, susc, pops)

    best = -1.0
    grid = [i / 100.0 for i in range(101)]
    for fa in grid:
        if fa > susc["A"] / pops["A"] + 1e-12:
            continue
        for fb in grid:
            if fb > susc["B"] / pops["B"] + 1e-12:
                continue
            if pops["A"] * fa + pops["B"] * fb > avail + 1e-9:
                continue
            val = (pops["A"] * (fa + _herd_value(pts, fa))
                   + pops["B"] * (fb + _herd_value(pts, fb)))
            best = max(best, val)
    assert res["value"] >= best - 1e-6
    assert res["value"] <= best + 0.5  # grid resolution slack


def test_herd_rejects_nonconcave_curve():
    with pytest.raises(ValueError, match="concave"):
        herd_immunity_allocate([(0.0, 0.0), (0.5, 0.1), (1.0, 0.9)],
                               10.0, {"R": 10.0}, {"R": 10.0})


def test_herd_rejects_decreasing_curve():
    with pytest.raises(ValueError, match="nondecreasing"):
        herd_immunity_allocate([(0.0, 0.5), (1.0, 0.0)],
                               10.0, {"R": 10.0}, {"R": 10.0})


def test_coverage_coefficient_values():
    assert coverage_coefficient(0.5, 2.0) == pytest.approx(1.0)
    assert coverage_coefficient(1.0, 1e9) == pytest.approx(1.0, abs=1e-8)
    assert coverage_coefficient(0.7, 1.0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        coverage_coefficient(0.0, 2.0)
