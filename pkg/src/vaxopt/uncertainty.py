"""Uncertainty layers: stochastic inventory formulas, two-stage stochastic
extensive form, robust and distributionally robust variants, and the linear
reformulation of normal chance constraints.

The extensive form replicates second-stage structure per scenario by scoping
variable families ("x_dv@w1", ...) while first-stage families stay shared, so
any builder composes into a scenario copy unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, Scenario
from .model import BINARY, EQ, GE, LE, LinExpr, Model, quicksum
from .scm import BuilderError, _idx
from . import solve as solver


# -- inverse normal CDF ----------------------------------------------------------

_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00)


def inverse_normal_cdf(p: float) -> float:
    """Standard normal quantile; rational approximation plus one Halley
    refinement step (relative error well below 1e-9)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must lie in (0,1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
             + c[5]) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r
             + a[5]) * q / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r
                             + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
              + c[5]) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # Halley step against the exact CDF
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def z_score(alpha: float) -> float:
    """Z value at confidence 1 - alpha."""
    return inverse_normal_cdf(1.0 - alpha)


# -- continuous review / newsvendor ----------------------------------------------


def reorder_policy(demand_rate: float, demand_std: float, lead_time: float,
                   lead_time_std: float, alpha: float, order_cost: float,
                   hold_cost: float, order_quantity: float) -> dict:
    """Continuous-review policy figures for one distribution center.

    Returns the total-cost expression (ordering plus holding with the
    lead-time demand safety buffer) and the reorder point, both closed-form.
    Note the asymmetry kept on purpose: the cost buffer uses lead * variance
    while the reorder point combines squared rate and squared lead terms.
    """
    if order_quantity <= 0:
        raise ValueError("order quantity must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("service significance level must lie in (0,1)")
    z = z_score(alpha)
    total_cost = (order_cost * (demand_rate / order_quantity)
                  + hold_cost * (order_quantity / 2.0
                                 + z * math.sqrt(lead_time * demand_std ** 2)))
    reorder_point = (demand_rate * lead_time
                     + z * math.sqrt(demand_rate ** 2 * lead_time_std ** 2
                                     + lead_time ** 2 * demand_std ** 2))
    return {"total_cost": total_cost, "reorder_point": reorder_point}


def newsvendor_allocation(c_under: float, c_over: float,
                          demand_cdf_inverse) -> float:
    """Critical-ratio quantile: allocate F^-1(cu / (cu + co))."""
    if c_under <= 0 or c_over <= 0:
        raise ValueError("underage and overage costs must be positive")
    ratio = c_under / (c_under + c_over)
    return float(demand_cdf_inverse(ratio))


# -- two-stage extensive form ----------------------------------------------------


class ScenarioScope:
    """Model proxy that suffixes second-stage families with the scenario id.

    First-stage families pass through unsuffixed, so constraints written by
    scenario builders couple naturally to shared first-stage variables.
    Objectives added through the scope are captured for probability
    weighting instead of landing on the model.
    """

    def __init__(self, model: Model, suffix: str, first_stage: set[str]):
        self._model = model
        self._suffix = suffix
        self._first_stage = first_stage
        self.captured: list[tuple[str, LinExpr, str]] = []

    def _fam(self, family: str) -> str:
        if family in self._first_stage:
            return family
        return f"{family}@{self._suffix}"

    def add_var(self, family, indices=(), domain="continuous",
                lb=0.0, ub=math.inf):
        if family in self._first_stage:
            raise BuilderError(
                f"family {family!r} is first-stage; a scenario builder may "
                "reference it but not re-register it")
        return self._model.add_var(self._fam(family), indices, domain, lb, ub)

    def ensure_var(self, family, indices=(), domain="continuous",
                   lb=0.0, ub=math.inf):
        return self._model.ensure_var(self._fam(family), indices, domain,
                                      lb, ub)

    def var(self, family, indices=()):
        return self._model.var(self._fam(family), indices)

    def has_var(self, family, indices=()):
        return self._model.has_var(self._fam(family), indices)

    def family(self, family):
        return self._model.family(self._fam(family))

    def add_constr(self, lhs, sense, rhs, tag):
        return self._model.add_constr(lhs, sense, rhs,
                                      f"{tag}@{self._suffix}")

    def add_objective(self, sense, expr, name=""):
        self.captured.append((sense, expr.copy(), name))

    def fresh(self, kind):
        return self._model.fresh(kind)

    def linearize_min(self, out, a, b, m_a, m_b, tag=""):
        if m_a <= 0 or m_b <= 0:
            raise ValueError("big-M for min linearization must be positive")
        seq = self.fresh("min")
        base = tag or f"gadget.min.{seq}"
        sel = self.ensure_var("_min_sel", (seq,), BINARY)
        self.add_constr(LinExpr.term(out) - a, LE, 0.0, f"{base}.ub_a")
        self.add_constr(LinExpr.term(out) - b, LE, 0.0, f"{base}.ub_b")
        self.add_constr(LinExpr.term(out) - a + m_a * LinExpr.term(sel),
                        GE, 0.0, f"{base}.lb_a")
        self.add_constr(LinExpr.term(out) - b - m_b * LinExpr.term(sel),
                        GE, -m_b, f"{base}.lb_b")

    def linearize_abs(self, out, e, tag=""):
        seq = self.fresh("abs")
        base = tag or f"gadget.abs.{seq}"
        self.add_constr(LinExpr.term(out) - e, GE, 0.0, f"{base}.pos")
        self.add_constr(LinExpr.term(out) + e, GE, 0.0, f"{base}.neg")

    @property
    def constraints(self):
        return self._model.constraints

    def families(self):
        return self._model.families()


def build_tssp_extensive(model: Model, inst: Instance,
                         first_stage_builders, second_stage_builders,
                         objective_name: str = "expected_cost") -> list[str]:
    """Deterministic equivalent of the two-stage stochastic program.

    First-stage builders run once on the bare model; whatever families they
    register are the here-and-now decisions.  Second-stage builders run once
    per scenario against a scoped model view and the scenario-overridden
    instance; their captured objectives are weighted by scenario probability
    and merged with the first-stage objectives into one expected-cost
    objective.
    """
    if inst.scenario_set is None or not len(inst.scenario_set):
        raise BuilderError("two-stage form needs a scenario set")
    probs = inst.scenario_set.probabilities()
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise BuilderError(
            f"scenario probabilities must be normalized, sum={sum(probs)!r}")
    tags: list[str] = []
    for builder in first_stage_builders:
        result = builder(model, inst)
        if result:
            tags.extend(result)
    first_stage_families = set(model.families())
    first_objs = list(model.objectives)
    model.objectives = []
    sense = first_objs[0].sense if first_objs else "min"
    total = LinExpr()
    for obj in first_objs:
        if obj.sense != sense:
            raise BuilderError("mixed objective senses in the two-stage form")
        total = total + obj.expr
    for scen in inst.scenario_set.scenarios:
        scope = ScenarioScope(model, scen.id, first_stage_families)
        scen_inst = inst.with_scenario(scen)
        for builder in second_stage_builders:
            result = builder(scope, scen_inst)
            if result:
                tags.extend(f"{t}@{scen.id}" for t in result)
        for (osense, expr, _name) in scope.captured:
            if osense != sense:
                raise BuilderError(
                    "mixed objective senses in the two-stage form")
            total = total + scen.probability * expr
    model.add_objective(sense, total, objective_name)
    return tags


def build_robust_mean_deviation(model: Model, inst: Instance,
                                scenario_objectives: dict[str, LinExpr],
                                deviation_weight: float | None = None
                                ) -> list[str]:
    """Mean objective plus weighted mean absolute deviation from the mean.

    scenario_objectives maps scenario id to that scenario's objective
    expression; the deviation weight defaults to the instance's penalty
    factor.  Replaces the model objectives with the robustified minimization.
    """
    if inst.scenario_set is None or not len(inst.scenario_set):
        raise BuilderError("robust objective needs a scenario set")
    weight = (inst.catalog.deviation_penalty
              if deviation_weight is None else deviation_weight)
    if weight < 0:
        raise BuilderError("deviation weight must be nonnegative")
    probs = {s.id: s.probability for s in inst.scenario_set.scenarios}
    missing = set(probs) - set(scenario_objectives)
    if missing:
        raise BuilderError(f"objective expressions missing for {sorted(missing)}")
    tags = []
    mean = LinExpr()
    for sid, expr in scenario_objectives.items():
        mean = mean + probs[sid] * expr
    total = mean.copy()
    for sid, expr in scenario_objectives.items():
        dev = model.ensure_var("obj_dev", (sid,))
        tag = f"uncertainty.robust.deviation[{sid}]"
        model.linearize_abs(dev, expr - mean, tag=tag)
        tags.extend([f"{tag}.pos", f"{tag}.neg"])
        total = total + weight * probs[sid] * LinExpr.term(dev)
    model.objectives = []
    model.add_objective("min", total, "robust_mean_deviation")
    return tags


# -- distributionally robust layer ------------------------------------------------


class AmbiguityError(ValueError):
    pass


@dataclass
class AmbiguitySet:
    """Finite-support moment ambiguity: probability vectors consistent with
    banded first moments and banded (std-scaled) second moments per cell."""

    scenario_ids: list[str]
    cells: list = field(default_factory=list)
    support: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_sigma_lo: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_sigma_hi: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def validate(self) -> None:
        if np.any(self.eps_mu < 0):
            raise AmbiguityError("mean slack must be nonnegative")
        if np.any(self.eps_sigma_lo > 1.0 + 1e-12) \
                or np.any(self.eps_sigma_lo < 0):
            raise AmbiguityError("lower moment scale must lie in [0, 1]")
        if np.any(self.eps_sigma_hi < 1.0 - 1e-12):
            raise AmbiguityError("upper moment scale must be at least 1")

    def worst_case_lp(self, costs) -> Model:
        """LP over scenario probabilities maximizing expected cost."""
        self.validate()
        m = Model("ambiguity_worst_case")
        n = len(self.scenario_ids)
        pvars = [m.add_var("p", (sid,), ub=1.0) for sid in self.scenario_ids]
        m.add_constr(quicksum(pvars), EQ, 1.0, "dro.simplex")
        for ci, cell in enumerate(self.cells):
            first = quicksum(self.support[w, ci] * LinExpr.term(pvars[w])
                             for w in range(n))
            m.add_constr(first, GE, self.mu[ci] - self.eps_mu[ci],
                         f"dro.mean_lo[{_idx(*_astuple(cell))}]")
            m.add_constr(first, LE, self.mu[ci] + self.eps_mu[ci],
                         f"dro.mean_hi[{_idx(*_astuple(cell))}]")
            second = quicksum(self.support[w, ci] ** 2 * LinExpr.term(pvars[w])
                              for w in range(n))
            m.add_constr(second, GE, self.sigma[ci] * self.eps_sigma_lo[ci],
                         f"dro.moment_lo[{_idx(*_astuple(cell))}]")
            m.add_constr(second, LE, self.sigma[ci] * self.eps_sigma_hi[ci],
                         f"dro.moment_hi[{_idx(*_astuple(cell))}]")
        m.add_objective("max", quicksum(float(costs[w]) * LinExpr.term(pvars[w])
                                        for w in range(n)), "expected_cost")
        return m

    def worst_case(self, costs) -> tuple[dict[str, float], float]:
        sol = solver.solve_lp(self.worst_case_lp(costs))
        if sol.status == solver.INFEASIBLE:
            raise AmbiguityError(
                "empty ambiguity set: moment bounds are inconsistent")
        if sol.status != solver.OPTIMAL:
            raise AmbiguityError(f"worst-case LP ended with {sol.status}")
        p = {sid: next(val for w, val in sol.values.items()
                       if w.family == "p" and w.indices == (sid,))
             for sid in self.scenario_ids}
        return p, float(sol.objective)


def _astuple(cell):
    return cell if isinstance(cell, tuple) else (cell,)


def ambiguity_from_instance(inst: Instance) -> AmbiguitySet:
    """Read the moment-ambiguity block riding on the scenario set."""
    if inst.scenario_set is None or not inst.scenario_set.ambiguity:
        raise AmbiguityError("instance carries no ambiguity block")
    amb = inst.scenario_set.ambiguity
    sids = [s.id for s in inst.scenario_set.scenarios]
    cells: list[tuple] = []
    support_map: dict[tuple, dict[str, float]] = {}
    for rec in amb.get("support", []):
        cell = (str(rec["vc"]), int(rec["t"]))
        support_map.setdefault(cell, {})[str(rec["scenario"])] = \
            float(rec["value"])
    cells = sorted(support_map)
    n, m = len(sids), len(cells)
    support = np.zeros((n, m))
    for ci, cell in enumerate(cells):
        for w, sid in enumerate(sids):
            if sid not in support_map[cell]:
                raise AmbiguityError(
                    f"support value missing for scenario {sid} cell {cell}")
            support[w, ci] = support_map[cell][sid]

    def cellvec(name: str, default: float | None = None) -> np.ndarray:
        vals = {(str(r["vc"]), int(r["t"])): float(r["value"])
                for r in amb.get(name, [])}
        out = np.zeros(m)
        for ci, cell in enumerate(cells):
            if cell in vals:
                out[ci] = vals[cell]
            elif default is not None:
                out[ci] = default
            else:
                raise AmbiguityError(f"ambiguity block lacks {name} for {cell}")
        return out

    lo = float(amb.get("std_lo_scale", 1.0))
    hi = float(amb.get("std_hi_scale", 1.0))
    aset = AmbiguitySet(
        scenario_ids=sids, cells=list(cells), support=support,
        mu=cellvec("mean"), eps_mu=cellvec("mean_slack", 0.0),
        sigma=cellvec("second_moment"),
        eps_sigma_lo=np.full(m, lo), eps_sigma_hi=np.full(m, hi))
    aset.validate()
    return aset


_ENUMERATION_CAP = 10_000


def dro_worst_case(candidates, scenario_cost, ambiguity: AmbiguitySet,
                   tol: float = 1e-6) -> dict:
    """min over candidate first-stage decisions of the worst-case expected
    cost over the ambiguity set.

    candidates enumerates the first-stage lattice (at most 10^4 points);
    scenario_cost(x, scenario_id) evaluates the second-stage cost.  For
    larger or continuous first stages use dro_worst_case_cuts.
    """
    cand = list(candidates)
    if not cand:
        raise AmbiguityError("no first-stage candidates supplied")
    if len(cand) > _ENUMERATION_CAP:
        raise AmbiguityError(
            f"{len(cand)} candidates exceed the enumeration cap; "
            "use dro_worst_case_cuts")
    best = None
    for x in cand:
        costs = [scenario_cost(x, sid) for sid in ambiguity.scenario_ids]
        p, value = ambiguity.worst_case(costs)
        if best is None or value < best["value"] - tol:
            best = {"first_stage": x, "worst_p": p, "value": value}
    return best


def dro_worst_case_cuts(master: Model, cost_exprs: dict[str, LinExpr],
                        ambiguity: AmbiguitySet, tol: float = 1e-6,
                        max_rounds: int = 200, theta_lb: float = 0.0) -> dict:
    """Cutting-plane outer loop for affine scenario costs.

    The master model holds first-stage variables, their constraints, and an
    objective; an epigraph variable is appended and worst-case cuts
    theta >= sum_w p_w * cost_w(x) are added until the bound gap closes.
    theta_lb must under-estimate the worst-case expected cost (0 suits the
    nonnegative-cost models built here).
    """
    theta = master.ensure_var("dro_theta", (), lb=theta_lb)
    if master.objectives:
        base = master.objectives[0]
        if base.sense != "min":
            raise AmbiguityError("cutting-plane master must minimize")
        expr = base.expr + LinExpr.term(theta)
        master.objectives = []
    else:
        expr = LinExpr.term(theta)
    master.add_objective("min", expr, "dro_master")
    rounds = 0
    while True:
        rounds += 1
        if rounds > max_rounds:
            raise AmbiguityError("cutting-plane loop did not converge")
        sol = solver.solve_milp(master)
        if sol.status != solver.OPTIMAL:
            raise AmbiguityError(f"master ended with {sol.status}")
        costs = [sol.value(cost_exprs[sid]) for sid in ambiguity.scenario_ids]
        p, value = ambiguity.worst_case(costs)
        theta_val = sol.values[theta]
        if value - theta_val <= tol:
            return {"first_stage": sol, "worst_p": p,
                    "value": float(sol.objective)}
        cut = LinExpr.term(theta)
        for sid, pw in p.items():
            if pw > 1e-12:
                cut = cut - pw * cost_exprs[sid]
        master.add_constr(cut, GE, 0.0, f"dro.cut[{rounds}]")


# -- chance constraints ------------------------------------------------------------


def cc_normal_rhs(mu: float, sigma: float, alpha: float) -> float:
    """Deterministic threshold of a normal right-hand-side chance constraint."""
    if sigma < 0:
        raise ValueError("standard deviation must be nonnegative")
    if not 0.0 < alpha < 1.0:
        raise ValueError("significance level must lie in (0,1)")
    if sigma == 0.0:
        return mu
    return mu + z_score(alpha) * sigma


def build_cc_constraints(model: Model, inst: Instance,
                         targets: str = "supply") -> list[str]:
    """Linear deterministic equivalents of service-level chance constraints.

    targets="supply": total inbound supply at each (vc, vaccine, period) with
    declared demand moments covers the 1-alpha demand quantile.
    targets="vehicle": per-vehicle transported volume covers the quantile of
    the demand assigned to that vehicle and period.
    """
    cat = inst.catalog
    alpha = cat.service_alpha
    tags = []
    if targets == "supply":
        if not cat.mean_supply:
            raise BuilderError("chance constraints need demand moments")
        from .scm import ensure_dv_flow
        ensure_dv_flow(model, inst)
        for (k, p, t), mu in sorted(cat.mean_supply.items()):
            sigma = cat.std_supply.get((k, p, t), 0.0)
            rhs = cc_normal_rhs(mu, sigma, alpha)
            expr = quicksum(model.var("x_dv", (j, k, p, t))
                            for j in inst.network.dcs
                            if k in inst.vcs_of_dc(j))
            tag = f"uncertainty.cc.supply[{_idx(k, p, t)}]"
            model.add_constr(expr, GE, rhs, tag)
            tags.append(tag)
        return tags
    if targets == "vehicle":
        if not cat.mean_vehicle:
            raise BuilderError("chance constraints need vehicle demand moments")
        for j in inst.network.dcs:
            for k in inst.vcs_of_dc(j):
                for p in inst.vaccine_ids():
                    for t in inst.periods():
                        for h in inst.network.vehicles:
                            model.ensure_var("x_dvh", (j, k, p, t, h))
        for (t, h), mu in sorted(cat.mean_vehicle.items()):
            sigma = cat.std_vehicle.get((t, h), 0.0)
            rhs = cc_normal_rhs(mu, sigma, alpha)
            expr = quicksum(model.var("x_dvh", (j, k, p, t, h))
                            for j in inst.network.dcs
                            for k in inst.vcs_of_dc(j)
                            for p in inst.vaccine_ids())
            tag = f"uncertainty.cc.vehicle[{_idx(t, h)}]"
            model.add_constr(expr, GE, rhs, tag)
            tags.append(tag)
        if model.family("x_dv"):
            for j in inst.network.dcs:
                for k in inst.vcs_of_dc(j):
                    for p in inst.vaccine_ids():
                        for t in inst.periods():
                            total = quicksum(
                                model.var("x_dvh", (j, k, p, t, h))
                                for h in inst.network.vehicles)
                            tag = f"uncertainty.cc.vehicle_link[{_idx(j, k, p, t)}]"
                            model.add_constr(
                                total - LinExpr.term(
                                    model.var("x_dv", (j, k, p, t))),
                                EQ, 0.0, tag)
                            tags.append(tag)
        return tags
    raise BuilderError(f"unknown chance-constraint target {targets!r}")
