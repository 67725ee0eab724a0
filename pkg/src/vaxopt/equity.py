"""Equity, sustainability, and multi-objective machinery.

Equity enters either through objectives (max-min satisfaction, deviation
penalties, Rawlsian floor, piecewise-linearized welfare) or through
constraints (minimum satisfaction rates).  Multi-objective models are reduced
to single-objective ones by demoting all but one objective to bounds; sweeping
those bounds traces a Pareto front.
"""

from __future__ import annotations

import math
import warnings

from .instance import Instance
from .model import (BINARY, EQ, GE, LE, LinExpr, Model, clone, format_number,
                    quicksum)
from .scm import BuilderError, _idx
from . import solve as solver


def gini(fractions) -> float:
    """Normalized mean absolute difference of coverage fractions.

    0 at perfect equality, at most 1 - 1/n; scale invariant.
    """
    f = [float(x) for x in fractions]
    if any(x < 0 for x in f):
        raise ValueError("coverage fractions must be nonnegative")
    total = sum(f)
    if total <= 0:
        raise ValueError("coverage fractions must not all be zero")
    n = len(f)
    spread = sum(abs(a - b) for a in f for b in f)
    return spread / (2.0 * n * total)


def build_maximin_satisfaction(model: Model, inst: Instance) -> list[str]:
    """Maximize the worst satisfaction ratio over (center, group) cells.

    The ratio has a constant denominator (total demand of the cell), so the
    bound rows stay linear.  Zero-demand cells cannot form a ratio and are
    skipped with a warning.
    """
    cat = inst.catalog
    if not cat.demand_by_group:
        raise BuilderError("maximin satisfaction consumes (g,vc,vaccine,t) demand")
    tags = []
    z = model.ensure_var("min_rate", ())
    for k in inst.network.vcs:
        for g in inst.network.groups:
            for p in inst.vaccine_ids():
                for t in inst.periods():
                    model.ensure_var("x_v_g", (g, k, p, t))
    for k in inst.network.vcs:
        for g in inst.network.groups:
            denom = sum(cat.demand_by_group.get((g, k, p, t), 0.0)
                        for p in inst.vaccine_ids() for t in inst.periods())
            if denom <= 0:
                warnings.warn(f"zero demand for group {g} at {k}; "
                              "cell excluded from the minimum")
                continue
            served = quicksum(model.var("x_v_g", (g, k, p, t))
                              for p in inst.vaccine_ids()
                              for t in inst.periods())
            tag = f"equity.maximin.rate[{_idx(k, g)}]"
            model.add_constr(served - denom * LinExpr.term(z), GE, 0.0, tag)
            tags.append(tag)
    model.add_objective("max", LinExpr.term(z), "min_satisfaction_rate")
    return tags


def build_min_satisfaction_rate(model: Model, inst: Instance,
                                gamma: float | None = None,
                                with_assignment: bool = False) -> list[str]:
    """Every (group, center) cell receives at least a gamma share of demand.

    With with_assignment the rate is enforced on manufacturer supply against
    demand routed through the DC-VC assignment binaries (products of gamma,
    demand and a binary stay linear).
    """
    cat = inst.catalog
    g_req = cat.min_satisfaction if gamma is None else float(gamma)
    if not 0.0 <= g_req <= 1.0:
        raise BuilderError(f"satisfaction rate must lie in [0,1], got {g_req}")
    if not cat.demand_by_group:
        raise BuilderError("satisfaction rates consume (g,vc,vaccine,t) demand")
    tags = []
    if not with_assignment:
        for k in inst.network.vcs:
            for g in inst.network.groups:
                for p in inst.vaccine_ids():
                    for t in inst.periods():
                        model.ensure_var("x_v_g", (g, k, p, t))
        for k in inst.network.vcs:
            for g in inst.network.groups:
                need = g_req * sum(cat.demand_by_group.get((g, k, p, t), 0.0)
                                   for p in inst.vaccine_ids()
                                   for t in inst.periods())
                served = quicksum(model.var("x_v_g", (g, k, p, t))
                                  for p in inst.vaccine_ids()
                                  for t in inst.periods())
                tag = f"equity.min_rate.cell[{_idx(k, g)}]"
                model.add_constr(served, GE, need, tag)
                tags.append(tag)
        return tags
    from .scm import ensure_md_flow
    ensure_md_flow(model, inst)
    for j in inst.network.dcs:
        for k in inst.vcs_of_dc(j):
            model.ensure_var("assign_jk", (j, k), BINARY)
    for j in inst.network.dcs:
        for p in inst.vaccine_ids():
            supply = quicksum(
                model.var("x_md", (i, j, p, t))
                for i in inst.network.manufacturers
                if p in inst.manufacturer_vaccines(i)
                for t in inst.periods())
            routed = LinExpr()
            for k in inst.vcs_of_dc(j):
                dem = sum(cat.demand_by_group.get((g, k, p, t), 0.0)
                          for g in inst.network.groups
                          for t in inst.periods())
                routed = routed + g_req * dem * LinExpr.term(
                    model.var("assign_jk", (j, k)))
            tag = f"equity.min_rate.assigned[{_idx(j, p)}]"
            model.add_constr(supply - routed, GE, 0.0, tag)
            tags.append(tag)
    return tags


def build_deviation_equity(model: Model, inst: Instance,
                           weight: float | None = None,
                           penalty: float | None = None) -> list[str]:
    """Penalized deviations of regional allocations from fair quantities.

    Allocation per (region, group) equals the fair share plus a positive
    minus a negative deviation, stays within demand, and the objective
    discourages under-allocation strongly (penalty factor), over-allocation
    mildly, and any gap to the minimum satisfaction share severely.
    """
    cat = inst.catalog
    varsigma = cat.equity_weight if weight is None else float(weight)
    if not 0.0 <= varsigma <= 1.0:
        raise BuilderError("deviation weight must lie in [0,1]")
    factor = cat.deviation_penalty if penalty is None else float(penalty)
    if not cat.demand_by_region:
        raise BuilderError("deviation equity consumes (region, group) demand")
    tags = []
    big = inst.big_m()
    obj = LinExpr()
    for (r, g), dem in sorted(cat.demand_by_region.items()):
        if dem <= 0:
            raise BuilderError(f"zero demand cell ({r},{g}) cannot be scored")
        fair = cat.fair_share.get((r, g), 0.0)
        for p in inst.vaccine_ids():
            model.ensure_var("x_v_r", (g, r, p))
        alloc = quicksum(model.var("x_v_r", (g, r, p))
                         for p in inst.vaccine_ids())
        dpos = model.ensure_var("dev_pos", (r, g))
        dneg = model.ensure_var("dev_neg", (r, g))
        gap = model.ensure_var("short_gap", (r, g))
        tag = f"equity.deviation.balance[{_idx(r, g)}]"
        model.add_constr(alloc - LinExpr.term(dpos) + LinExpr.term(dneg),
                         EQ, fair, tag)
        tags.append(tag)
        tag = f"equity.deviation.demand_cap[{_idx(r, g)}]"
        model.add_constr(LinExpr.term(dpos) - LinExpr.term(dneg), LE,
                         dem - fair, tag)
        tags.append(tag)
        tag = f"equity.deviation.floor_gap[{_idx(r, g)}]"
        model.add_constr(LinExpr.term(gap) + LinExpr.term(dpos)
                         - LinExpr.term(dneg), GE,
                         cat.min_satisfaction * dem - fair, tag)
        tags.append(tag)
        obj = obj + (factor * varsigma / dem) * LinExpr.term(dneg)
        obj = obj + ((1.0 - varsigma) / dem) * LinExpr.term(dpos)
        obj = obj + big * LinExpr.term(gap)
    model.add_objective("min", obj, "deviation_equity")
    return tags


# -- regional allocation helpers ---------------------------------------------------


def register_regional_allocation(model: Model, inst: Instance,
                                 supply: float,
                                 caps: dict | None = None) -> list[str]:
    """Per-region allocation variables sharing a common supply pool."""
    tags = []
    for r in inst.network.regions:
        ub = math.inf if caps is None else caps.get(r, math.inf)
        model.ensure_var("alloc_r", (r,), ub=ub)
    tag = "equity.alloc.supply"
    model.add_constr(quicksum(model.var("alloc_r", (r,))
                              for r in inst.network.regions),
                     LE, supply, tag)
    tags.append(tag)
    return tags


def build_rawlsian(model: Model, inst: Instance) -> list[str]:
    """Maximize the smallest regional allocation."""
    if not model.family("alloc_r"):
        raise BuilderError("regional allocation variables are not registered")
    tags = []
    floor = model.ensure_var("alloc_floor", ())
    for v in model.family("alloc_r"):
        tag = f"equity.rawlsian.floor[{v.indices[0]}]"
        model.add_constr(LinExpr.term(floor) - LinExpr.term(v), LE, 0.0, tag)
        tags.append(tag)
    model.add_objective("max", LinExpr.term(floor), "rawlsian_floor")
    return tags


def build_proportional_share(model: Model, inst: Instance,
                             slack: float = 0.0) -> list[str]:
    """Tie each region's allocation to its population share of the total."""
    if not model.family("alloc_r"):
        raise BuilderError("regional allocation variables are not registered")
    pop = inst.catalog.region_population
    total_pop = sum(pop.get(r, 0.0) for r in inst.network.regions)
    if total_pop <= 0:
        raise BuilderError("region populations are required for shares")
    tags = []
    total = quicksum(model.var("alloc_r", (r,)) for r in inst.network.regions)
    for r in inst.network.regions:
        share = pop.get(r, 0.0) / total_pop
        expr = LinExpr.term(model.var("alloc_r", (r,))) - share * total
        tag = f"equity.share.hi[{r}]"
        model.add_constr(expr, LE, slack, tag)
        tags.append(tag)
        tag = f"equity.share.lo[{r}]"
        model.add_constr(expr, GE, -slack, tag)
        tags.append(tag)
    return tags


def build_social_welfare_ii(model: Model, inst: Instance,
                            unconstrained_max: dict,
                            segments: int = 8) -> list[str]:
    """Maximize total squared shortfall against each region's stand-alone
    maximum, via a piecewise-linear over-approximation of the squares.

    Each shortfall square is written in the convex-combination form over a
    uniform grid; chords of a convex function over-approximate it, exactly at
    the grid points.  The exact quadratic value can be recomputed after the
    solve with social_welfare_ii_value.
    """
    if segments < 1:
        raise BuilderError("need at least one segment")
    if not model.family("alloc_r"):
        raise BuilderError("regional allocation variables are not registered")
    tags = []
    total = LinExpr()
    for v in sorted(model.family("alloc_r"), key=lambda w: w.sort_key()):
        r = v.indices[0]
        u = float(unconstrained_max.get(r, 0.0))
        if u <= 0:
            continue
        pts = [u * i / segments for i in range(segments + 1)]
        lam = [model.ensure_var("swii_lam", (r, i), ub=1.0)
               for i in range(segments + 1)]
        seg = [model.ensure_var("swii_seg", (r, i), BINARY)
               for i in range(segments)]
        q = model.ensure_var("swii_q", (r,))
        tag = f"equity.swii.convexity[{r}]"
        model.add_constr(quicksum(lam), EQ, 1.0, tag)
        tags.append(tag)
        tag = f"equity.swii.one_segment[{r}]"
        model.add_constr(quicksum(seg), EQ, 1.0, tag)
        tags.append(tag)
        for i in range(segments + 1):
            allowed = []
            if i > 0:
                allowed.append(seg[i - 1])
            if i < segments:
                allowed.append(seg[i])
            tag = f"equity.swii.adjacency[{_idx(r, i)}]"
            model.add_constr(LinExpr.term(lam[i]) - quicksum(allowed),
                             LE, 0.0, tag)
            tags.append(tag)
        shortfall = quicksum(pts[i] * LinExpr.term(lam[i])
                             for i in range(segments + 1))
        tag = f"equity.swii.shortfall[{r}]"
        model.add_constr(shortfall + LinExpr.term(v), EQ, u, tag)
        tags.append(tag)
        tag = f"equity.swii.square[{r}]"
        model.add_constr(LinExpr.term(q)
                         - quicksum(pts[i] ** 2 * LinExpr.term(lam[i])
                                    for i in range(segments + 1)),
                         EQ, 0.0, tag)
        tags.append(tag)
        total = total + LinExpr.term(q)
    model.add_objective("max", total, "social_welfare_ii")
    return tags


def social_welfare_ii_value(model: Model, sol: solver.Solution,
                            unconstrained_max: dict) -> float:
    """Exact quadratic welfare of a solved allocation (post-hoc audit)."""
    total = 0.0
    for v in model.family("alloc_r"):
        u = float(unconstrained_max.get(v.indices[0], 0.0))
        total += (u - sol.values.get(v, 0.0)) ** 2
    return total


# -- sustainability -----------------------------------------------------------------


def build_carbon_objective(model: Model, inst: Instance) -> list[str]:
    """Register the emission objective (facility establishment plus
    distance-weighted transshipment) and the total-shortage objective."""
    cat = inst.catalog
    emission = LinExpr()
    for fam in ("y_dc", "y_dc_cold", "y_dc_vcold", "y_dc_ucold", "z_vc"):
        for v in model.family(fam):
            emission = emission + cat.emission_facility * LinExpr.term(v)
    for fam in ("x_md", "x_dv", "x_dd", "x_vv"):
        for v in model.family(fam):
            a, b = v.indices[0], v.indices[1]
            dist = inst.distance(a, b, default=0.0)
            if dist:
                emission = emission \
                    + cat.emission_transport * dist * LinExpr.term(v)
    shortage = LinExpr()
    for fam in ("s_v_g", "s_v"):
        for v in model.family(fam):
            shortage = shortage + LinExpr.term(v)
    model.add_objective("min", emission, "carbon_emission")
    model.add_objective("min", shortage, "total_shortage")
    return []


# -- multi-objective handling --------------------------------------------------------


def epsilon_constraint_scalarize(model: Model, keep_objective: str,
                                 bounds: dict[str, float]) -> Model:
    """Demote all objectives except one to bounds at their epsilon values.

    Minimized objectives become <= bounds, maximized ones >= bounds.  Returns
    a new model; the input is untouched.
    """
    names = [o.name for o in model.objectives]
    if keep_objective not in names:
        raise BuilderError(f"unknown objective {keep_objective!r}; "
                           f"registered: {names}")
    if len(names) < 2:
        raise BuilderError("scalarization needs at least two objectives")
    out = clone(model)
    kept = None
    demoted = []
    for obj in out.objectives:
        if obj.name == keep_objective and kept is None:
            kept = obj
        else:
            demoted.append(obj)
    out.objectives = [kept]
    for obj in demoted:
        if obj.name not in bounds:
            raise BuilderError(f"epsilon bound missing for objective "
                               f"{obj.name!r}")
        eps = float(bounds[obj.name])
        sense = LE if obj.sense == "min" else GE
        out.add_constr(obj.expr, sense, eps, f"epsilon.bound[{obj.name}]")
    return out


def pareto_sweep(model: Model, keep_objective: str,
                 grids: dict[str, list[float]],
                 solve_fn=None) -> list[dict]:
    """Solve over the epsilon grid product; one row per grid point."""
    solve_fn = solve_fn or solver.solve_milp
    names = [name for name in grids]
    rows = []

    def rec(idx: int, current: dict):
        if idx == len(names):
            scal = epsilon_constraint_scalarize(model, keep_objective,
                                                dict(current))
            sol = solve_fn(scal)
            row = {"epsilon": dict(current), "status": sol.status,
                   "objectives": {}}
            if sol.status == solver.OPTIMAL:
                for obj in model.objectives:
                    row["objectives"][obj.name] = sol.value(obj.expr)
            rows.append(row)
            return
        for val in grids[names[idx]]:
            current[names[idx]] = val
            rec(idx + 1, current)
        del current[names[idx]]

    rec(0, {})
    return rows


def pareto_front(rows: list[dict], senses: dict[str, str],
                 tol: float = 1e-6) -> list[dict]:
    """Filter sweep rows to mutually non-dominated points."""
    pts = [r for r in rows if r["status"] == solver.OPTIMAL]

    def dominates(a, b) -> bool:
        better_somewhere = False
        for name, sense in senses.items():
            av, bv = a["objectives"][name], b["objectives"][name]
            if sense == "min":
                if av > bv + tol:
                    return False
                if av < bv - tol:
                    better_somewhere = True
            else:
                if av < bv - tol:
                    return False
                if av > bv + tol:
                    better_somewhere = True
        return better_somewhere

    out = []
    for a in pts:
        if not any(dominates(b, a) for b in pts if b is not a):
            if not any(_same_point(a, b, tol) for b in out):
                out.append(a)
    return out


def _same_point(a: dict, b: dict, tol: float) -> bool:
    return all(abs(a["objectives"][n] - b["objectives"][n]) <= tol
               for n in a["objectives"])


def pareto_csv(rows: list[dict], path: str) -> None:
    eps_names = sorted({n for r in rows for n in r["epsilon"]})
    obj_names = sorted({n for r in rows for n in r.get("objectives", {})})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        head = [f"eps_{n}" for n in eps_names] + obj_names + ["status"]
        fh.write(",".join(head) + "\n")
        for r in rows:
            cells = [format_number(round(r["epsilon"][n], 9))
                     for n in eps_names]
            cells += [format_number(round(r["objectives"][n], 9))
                      if n in r.get("objectives", {}) else ""
                      for n in obj_names]
            cells.append(r["status"])
            fh.write(",".join(cells) + "\n")
