"""Vehicle routing builders for last-mile delivery and mobile clinics.

The region set must declare a depot with id "0"; every other region is a
demand stop.  Arc variables are shared between the full-visit and
selective-visit formulations.  Subtours are eliminated either with ordering
variables (mtz) or lazily: solve, detect depot-free cycles, add the violated
subset cuts, and solve again (dfj_lazy).

Families: arc[r,r'] (binary movement r->r'), veh_assign[r,h], start_time[r],
order_mtz[r], visit[r], svc_time[r].
"""

from __future__ import annotations

import math

from .instance import Instance
from .model import BINARY, EQ, GE, LE, LinExpr, Model, quicksum
from .scm import BuilderError, _idx
from . import solve as solver

DEPOT = "0"


def _nodes(inst: Instance) -> tuple[str, list[str]]:
    regions = list(inst.network.regions)
    if DEPOT not in regions:
        raise BuilderError('routing needs a depot region with id "0"')
    stops = [r for r in regions if r != DEPOT]
    return DEPOT, stops


def _travel(inst: Instance, a: str, b: str) -> float:
    t = inst.catalog.travel_time.get((a, b))
    if t is None:
        t = inst.catalog.travel_time.get((b, a))
    if t is None:
        raise BuilderError(f"travel time missing for {a} -> {b}")
    return t


def _region_demand(inst: Instance, r: str) -> float:
    return sum(v for (rr, _g), v in inst.catalog.demand_by_region.items()
               if rr == r)


def _time_big_m(inst: Instance, nodes: list[str]) -> float:
    total = 0.0
    for a in nodes:
        for b in nodes:
            if a != b:
                total += _travel(inst, a, b)
    total += sum(inst.catalog.service_time.get(r, 0.0) for r in nodes)
    return total + 1.0


def _ensure_arcs(model: Model, nodes: list[str]) -> None:
    for a in nodes:
        for b in nodes:
            if a != b:
                model.ensure_var("arc", (a, b), BINARY)


def build_vrp(model: Model, inst: Instance,
              subtour: str = "dfj_lazy") -> list[str]:
    """Capacitated routing with start-time propagation.

    Every stop is served exactly once by one vehicle; at most the fleet size
    leaves (and returns to) the depot.  Start times chain along chosen arcs
    through a big-M linearization of the bilinear original.  With
    subtour="dfj_lazy" the subset cuts are left to solve_routing; "mtz" adds
    ordering variables instead.
    """
    if subtour not in ("dfj_lazy", "mtz"):
        raise BuilderError(f"unknown subtour mode {subtour!r}")
    depot, stops = _nodes(inst)
    nodes = [depot] + stops
    vehicles = inst.network.vehicles
    if not vehicles:
        raise BuilderError("routing needs at least one vehicle")
    tags = []
    _ensure_arcs(model, nodes)
    for r in stops:
        model.ensure_var("start_time", (r,))
        for h in vehicles:
            model.ensure_var("veh_assign", (r, h), BINARY)

    for r in stops:
        tag = f"routing.vrp.one_vehicle[{r}]"
        model.add_constr(quicksum(model.var("veh_assign", (r, h))
                                  for h in vehicles), EQ, 1.0, tag)
        tags.append(tag)
    fleet = float(len(vehicles))
    tag = "routing.vrp.depot_out"
    model.add_constr(quicksum(model.var("arc", (depot, r)) for r in stops),
                     LE, fleet, tag)
    tags.append(tag)
    tag = "routing.vrp.depot_in"
    model.add_constr(quicksum(model.var("arc", (r, depot)) for r in stops),
                     LE, fleet, tag)
    tags.append(tag)
    for r in stops:
        tag = f"routing.vrp.out_degree[{r}]"
        model.add_constr(quicksum(model.var("arc", (r, b))
                                  for b in nodes if b != r), EQ, 1.0, tag)
        tags.append(tag)
        tag = f"routing.vrp.in_degree[{r}]"
        model.add_constr(quicksum(model.var("arc", (a, r))
                                  for a in nodes if a != r), EQ, 1.0, tag)
        tags.append(tag)
    for h in vehicles:
        cap = inst.catalog.vehicle_capacity.get(h, math.inf)
        if math.isfinite(cap):
            tag = f"routing.vrp.capacity[{h}]"
            model.add_constr(
                quicksum(_region_demand(inst, r)
                         * LinExpr.term(model.var("veh_assign", (r, h)))
                         for r in stops), LE, cap, tag)
            tags.append(tag)
    big_m = _time_big_m(inst, nodes)
    for a in nodes:
        for b in stops:
            if a == b:
                continue
            arr = LinExpr.term(model.var("start_time", (b,)))
            if a != depot:
                arr = arr - LinExpr.term(model.var("start_time", (a,)))
            hop = _travel(inst, a, b) + inst.catalog.service_time.get(a, 0.0)
            y = model.var("arc", (a, b))
            tag = f"routing.vrp.start_time[{_idx(a, b)}]"
            model.add_constr(arr + big_m * (1.0 - LinExpr.term(y)),
                             GE, hop, tag)
            tags.append(tag)
    if subtour == "mtz":
        n = float(len(stops))
        for r in stops:
            model.ensure_var("order_mtz", (r,), lb=1.0, ub=n)
        for a in stops:
            for b in stops:
                if a == b:
                    continue
                tag = f"routing.vrp.mtz[{_idx(a, b)}]"
                model.add_constr(
                    LinExpr.term(model.var("order_mtz", (a,)))
                    - LinExpr.term(model.var("order_mtz", (b,)))
                    + n * LinExpr.term(model.var("arc", (a, b))),
                    LE, n - 1.0, tag)
                tags.append(tag)
    travel = quicksum(_travel(inst, a, b) * LinExpr.term(model.var("arc",
                                                                   (a, b)))
                      for a in nodes for b in nodes if a != b)
    model.add_objective("min", travel, "travel_time")
    return tags


def build_selective_routing(model: Model, inst: Instance,
                            time_budget: float) -> list[str]:
    """Visit a chosen subset of regions within a total time budget.

    Service durations are decisions bounded below by the nominal per-stop
    service time; travel plus service must fit the budget.  The objective
    maximizes demand served over visited regions.  Ordering variables keep
    tours anchored at the depot.
    """
    if time_budget <= 0:
        raise BuilderError("time budget must be positive")
    depot, stops = _nodes(inst)
    nodes = [depot] + stops
    vehicles = inst.network.vehicles or ("H1",)
    tags = []
    _ensure_arcs(model, nodes)
    n = float(len(stops))
    for r in stops:
        model.ensure_var("visit", (r,), BINARY)
        model.ensure_var("svc_time", (r,))
        model.ensure_var("order_mtz", (r,), lb=0.0, ub=n)
    for r in stops:
        z = model.var("visit", (r,))
        tag = f"routing.selective.out_degree[{r}]"
        model.add_constr(quicksum(model.var("arc", (r, b))
                                  for b in nodes if b != r)
                         - LinExpr.term(z), EQ, 0.0, tag)
        tags.append(tag)
        tag = f"routing.selective.in_degree[{r}]"
        model.add_constr(quicksum(model.var("arc", (a, r))
                                  for a in nodes if a != r)
                         - LinExpr.term(z), EQ, 0.0, tag)
        tags.append(tag)
        svc = inst.catalog.service_time.get(r, 0.0)
        tag = f"routing.selective.service_floor[{r}]"
        model.add_constr(LinExpr.term(model.var("svc_time", (r,)))
                         - svc * LinExpr.term(z), GE, 0.0, tag)
        tags.append(tag)
        tag = f"routing.selective.order_gate[{r}]"
        model.add_constr(LinExpr.term(model.var("order_mtz", (r,)))
                         - n * LinExpr.term(z), LE, 0.0, tag)
        tags.append(tag)
    fleet = float(len(vehicles))
    tag = "routing.selective.depot_out"
    model.add_constr(quicksum(model.var("arc", (depot, r)) for r in stops),
                     LE, fleet, tag)
    tags.append(tag)
    tag = "routing.selective.depot_balance"
    model.add_constr(quicksum(model.var("arc", (depot, r)) for r in stops)
                     - quicksum(model.var("arc", (r, depot)) for r in stops),
                     EQ, 0.0, tag)
    tags.append(tag)
    for a in stops:
        for b in stops:
            if a == b:
                continue
            tag = f"routing.selective.mtz[{_idx(a, b)}]"
            model.add_constr(
                LinExpr.term(model.var("order_mtz", (a,)))
                - LinExpr.term(model.var("order_mtz", (b,)))
                + n * LinExpr.term(model.var("arc", (a, b))),
                LE, n - 1.0, tag)
            tags.append(tag)
    spent = quicksum(_travel(inst, a, b) * LinExpr.term(model.var("arc", (a, b)))
                     for a in nodes for b in nodes if a != b)
    spent = spent + quicksum(model.var("svc_time", (r,)) for r in stops)
    tag = "routing.selective.time_budget"
    model.add_constr(spent, LE, time_budget, tag)
    tags.append(tag)
    served = quicksum(_region_demand(inst, r)
                      * LinExpr.term(model.var("visit", (r,)))
                      for r in stops)
    model.add_objective("max", served, "served_demand")
    return tags


# -- lazy subtour separation -----------------------------------------------------


def find_subtours(model: Model, values: dict) -> list[list[str]]:
    """Depot-free cycles in the chosen arcs (empty list when tours are clean)."""
    succ: dict[str, list[str]] = {}
    nodes: set[str] = set()
    for v in model.family("arc"):
        a, b = v.indices
        nodes.update((a, b))
        if values.get(v, 0.0) > 0.5:
            succ.setdefault(a, []).append(b)
    seen: set[str] = set()
    stack = [DEPOT]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(succ.get(cur, []))
    cycles = []
    remaining = {r for r in nodes if r not in seen and succ.get(r)}
    while remaining:
        start = sorted(remaining)[0]
        cyc = [start]
        cur = succ[start][0]
        while cur != start and cur in remaining:
            cyc.append(cur)
            cur = succ.get(cur, [start])[0]
        for r in cyc:
            remaining.discard(r)
        if len(cyc) >= 2:
            cycles.append(cyc)
    return cycles


def solve_routing(model: Model, inst: Instance, rel_gap: float = 1e-6,
                  node_limit: int = 20000,
                  max_rounds: int = 50) -> solver.Solution:
    """Solve, separate violated depot-free cycles, cut, and repeat.

    Works for both subtour modes; with mtz ordering no cuts ever trigger and
    this is a single solve.
    """
    cut_round = 0
    while True:
        sol = solver.solve_milp(model, rel_gap=rel_gap, node_limit=node_limit)
        if sol.status != solver.OPTIMAL:
            return sol
        cycles = find_subtours(model, sol.values)
        if not cycles:
            return sol
        cut_round += 1
        if cut_round > max_rounds:
            raise BuilderError("subtour separation did not converge")
        for ci, cyc in enumerate(cycles):
            members = set(cyc)
            expr = quicksum(model.var("arc", (a, b))
                            for a in cyc for b in cyc
                            if a != b and model.has_var("arc", (a, b)))
            tag = (f"routing.vrp.subtour_cut[{cut_round},{ci},"
                   f"{'-'.join(cyc)}]")
            model.add_constr(expr, LE, float(len(members) - 1), tag)


def route_report(model: Model, sol: solver.Solution,
                 inst: Instance) -> list[dict]:
    """Tours reconstructed from the arc values, one row per visit."""
    succ = {}
    for v in model.family("arc"):
        if sol.values.get(v, 0.0) > 0.5:
            succ[v.indices[0]] = v.indices[1]
    rows = []
    # multiple tours leave the depot: walk each depot-out arc separately
    outs = sorted(v.indices[1] for v in model.family("arc")
                  if v.indices[0] == DEPOT and sol.values.get(v, 0.0) > 0.5)
    for tour_no, first in enumerate(outs):
        order = 1
        cur = first
        while cur != DEPOT:
            vehicle = ""
            for v in model.family("veh_assign"):
                if v.indices[0] == cur and sol.values.get(v, 0.0) > 0.5:
                    vehicle = v.indices[1]
                    break
            arrival = 0.0
            if model.has_var("start_time", (cur,)):
                arrival = sol.values.get(model.var("start_time", (cur,)), 0.0)
            rows.append({"vehicle": vehicle or f"tour{tour_no}",
                         "order": order, "region": cur,
                         "arrival": arrival,
                         "load": _region_demand(inst, cur)})
            cur = succ.get(cur, DEPOT)
            order += 1
    return rows


def route_report_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("vehicle,order,region,arrival,load\n")
        for row in rows:
            fh.write(f"{row['vehicle']},{row['order']},{row['region']},"
                     f"{row['arrival']:.6g},{row['load']:.6g}\n")
