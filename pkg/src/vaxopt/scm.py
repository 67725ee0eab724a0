"""Supply chain constraint builders: manufacturer, DC, and VC echelons.

Each builder is a pure function of (model, instance): it registers the
variable families it needs (shared families are created once and reused
across builders), adds its constraint block, and returns the list of
constraint tags it created.  Tags follow "scm.<builder>.<rule>[indices]" so
audits can aggregate residuals per rule.

Variable families:
  x_md[i,j,p,t]        manufacturer->DC shipment ordered/produced at t
                       (arrives at t + lead time)
  x_md_order[i,j,t',t] order-time/receive-time shipment (cold-chain system)
  order_sel[i,p,t',t]  order placed at t' for delivery at t (binary)
  mfg_on[i,t]          manufacturer selected for production (binary)
  x_dv[j,k,p,t]        DC->VC shipment
  x_dd[j,j',p,t]       DC->DC transshipment
  x_vv[k,k',p,t]       VC->VC lateral transshipment
  inv_dc[j,t], inv_vc[k,t]   end-of-period inventories
  w_dc[j,p,t], w_vc[k,p,t]   wasted vials
  y_dc[j], y_dc_cold/vcold/ucold[j]  DC opening decisions (binary)
  assign_jk[j,k]       DC-VC assignment (binary)
  x_v[k,p,t], s_v[k,p,t]     vaccinations and shortages (aggregate)
  x_v_g[g,k,p,t], s_v_g[g,k,p,t]  group-level vaccinations and shortages
  y_v[g,k,p,t]         priority-group fulfilment
  staff_req/staff_extra[k,t] workforce levels (integer)
  open_alloc[k,p,t,t'] vials received at t and opened at t'
  opened[k,p,t']       vials opened at t'
  init_open/init_waste[k,p,t']  split of initial stock
  opened_sized[n,k,p,t] opened vials of size n
  dose_admin[g,k,p,t,t'] doses given at t' from vials opened at t
  dose_expiry[k,p,t]   doses expiring from vials opened at t
  w_ov[k,p,t]          open-vial dose wastage
"""

from __future__ import annotations

import math

from .instance import Instance
from .model import (BINARY, EQ, GE, INTEGER, LE, LinExpr, Model, lin,
                    quicksum)


class BuilderError(ValueError):
    """A builder was invoked on an instance it cannot serve."""


def _idx(*parts) -> str:
    return ",".join(str(p) for p in parts)


def _lead(inst: Instance, j: str, lead_time: int | None) -> int:
    if lead_time is not None:
        return int(lead_time)
    return int(inst.catalog.lead_time.get(j, 0))


# -- shared family registration -------------------------------------------------


def ensure_md_flow(model: Model, inst: Instance) -> None:
    for i in inst.network.manufacturers:
        for p in inst.manufacturer_vaccines(i):
            for j in inst.network.dcs:
                for t in inst.periods():
                    model.ensure_var("x_md", (i, j, p, t))


def ensure_dv_flow(model: Model, inst: Instance) -> None:
    for j in inst.network.dcs:
        for k in inst.vcs_of_dc(j):
            for p in inst.vaccine_ids():
                for t in inst.periods():
                    model.ensure_var("x_dv", (j, k, p, t))


def _dv_inflow(model: Model, inst: Instance, k: str, p: str, t: int) -> LinExpr:
    terms = []
    for j in inst.network.dcs:
        if k in inst.vcs_of_dc(j) and model.has_var("x_dv", (j, k, p, t)):
            terms.append(model.var("x_dv", (j, k, p, t)))
    return quicksum(terms)


# -- manufacturers ---------------------------------------------------------------


def build_manufacturer_capacity(model: Model, inst: Instance) -> list[str]:
    """Production capacity with manufacturer selection forcing.

    Outbound flow of each vaccine in each period is capped by the declared
    production capacity, switched by the manufacturer-selection binary.
    Entries absent from the capacity tensor are unbounded and add no row.
    """
    if not inst.catalog.production:
        raise BuilderError("manufacturer capacity tensor is missing")
    ensure_md_flow(model, inst)
    tags = []
    for i in inst.network.manufacturers:
        for t in inst.periods():
            model.ensure_var("mfg_on", (i, t), BINARY)
    for i in inst.network.manufacturers:
        for p in inst.manufacturer_vaccines(i):
            for t in inst.periods():
                cap = inst.catalog.production.get((i, p, t), math.inf)
                if not math.isfinite(cap):
                    continue
                on = model.var("mfg_on", (i, t))
                expr = quicksum(model.var("x_md", (i, j, p, t))
                                for j in inst.network.dcs) - cap * LinExpr.term(on)
                tag = f"scm.manufacturer_capacity.cap[{_idx(i, p, t)}]"
                model.add_constr(expr, LE, 0.0, tag)
                tags.append(tag)
    return tags


def build_order_exclusivity(model: Model, inst: Instance) -> list[str]:
    """At most one pending order per manufacturer, vaccine and delivery time.

    A manufacturer cannot accept a new order placed strictly between an
    active order's placement and delivery times.
    """
    T = inst.horizon
    tags = []
    for i in inst.network.manufacturers:
        for p in inst.manufacturer_vaccines(i):
            for t in inst.periods():
                for tp in range(1, t + 1):
                    model.ensure_var("order_sel", (i, p, tp, t), BINARY)
    n_orders = sum(1 for _ in model.family("order_sel")) or 1
    for i in inst.network.manufacturers:
        for p in inst.manufacturer_vaccines(i):
            for t in inst.periods():
                expr = quicksum(model.var("order_sel", (i, p, tp, t))
                                for tp in range(1, t + 1))
                tag = f"scm.order_exclusivity.single[{_idx(i, p, t)}]"
                model.add_constr(expr, LE, 1.0, tag)
                tags.append(tag)
            for t in inst.periods():
                for tp in range(1, t + 1):
                    inner = [model.var("order_sel", (i, p, th, td))
                             for th in range(tp + 1, t)
                             for td in range(th, T + 1)]
                    if not inner:
                        continue
                    sel = model.var("order_sel", (i, p, tp, t))
                    expr = quicksum(inner) + n_orders * LinExpr.term(sel)
                    tag = ("scm.order_exclusivity.no_overlap"
                           f"[{_idx(i, p, tp, t)}]")
                    model.add_constr(expr, LE, float(n_orders), tag)
                    tags.append(tag)
    return tags


# -- distribution centers --------------------------------------------------------


def build_dc_flow(model: Model, inst: Instance,
                  lead_time: int | None = None) -> list[str]:
    """DC inventory conservation with lead time, location forcing, capacity.

    Manufacturer shipments ordered at t arrive at t + lead; before the first
    arrival the balance is fed only by transshipment.  All in/outflow at a DC
    is switched by its opening decision, and inventory respects capacity and
    safety stock whenever those are declared (finite).
    """
    T = inst.horizon
    ensure_md_flow(model, inst)
    ensure_dv_flow(model, inst)
    tags = []
    big_m = inst.big_m()
    cat = inst.catalog
    for j in inst.network.dcs:
        lead = _lead(inst, j, lead_time)
        if lead < 0 or lead >= T:
            raise BuilderError(f"lead time {lead} outside horizon for DC {j}")
        model.ensure_var("y_dc", (j,), BINARY)
        for t in inst.periods():
            model.ensure_var("inv_dc", (j, t))
            for p in inst.vaccine_ids():
                model.ensure_var("w_dc", (j, p, t))
                for jp in inst.network.dcs:
                    if jp != j:
                        model.ensure_var("x_dd", (j, jp, p, t))
    for j in inst.network.dcs:
        lead = _lead(inst, j, lead_time)
        others = [jp for jp in inst.network.dcs if jp != j]
        y = model.var("y_dc", (j,))
        init = cat.initial_inventory_dc.get(j, 0.0)
        for t in inst.periods():
            inflow_dd = quicksum(model.var("x_dd", (jp, j, p, t))
                                 for jp in others for p in inst.vaccine_ids())
            inflow_md = LinExpr()
            if t > lead:
                inflow_md = quicksum(
                    model.var("x_md", (i, j, p, t - lead))
                    for i in inst.network.manufacturers
                    for p in inst.manufacturer_vaccines(i))
            out_dv = quicksum(model.var("x_dv", (j, k, p, t))
                              for k in inst.vcs_of_dc(j)
                              for p in inst.vaccine_ids())
            out_dd = quicksum(model.var("x_dd", (j, jp, p, t))
                              for jp in others for p in inst.vaccine_ids())
            waste = quicksum(model.var("w_dc", (j, p, t))
                             for p in inst.vaccine_ids())
            prev = (LinExpr.term(model.var("inv_dc", (j, t - 1)))
                    if t > 1 else LinExpr.const(init))
            balance = (LinExpr.term(model.var("inv_dc", (j, t))) - prev
                       - inflow_md - inflow_dd + out_dv + out_dd + waste)
            rule = "balance" if t > lead else "balance_pre_lead"
            tag = f"scm.dc_flow.{rule}[{_idx(j, t)}]"
            model.add_constr(balance, EQ, 0.0, tag)
            tags.append(tag)

            tag = f"scm.dc_flow.outflow_open[{_idx(j, t)}]"
            model.add_constr(out_dv + out_dd + waste
                             - big_m * LinExpr.term(y), LE, 0.0, tag)
            tags.append(tag)
            rule = "inflow_open" if t > lead else "inflow_open_pre_lead"
            tag = f"scm.dc_flow.{rule}[{_idx(j, t)}]"
            model.add_constr(inflow_md + inflow_dd - big_m * LinExpr.term(y),
                             LE, 0.0, tag)
            tags.append(tag)

            cap = cat.dc_capacity.get(j, math.inf)
            if math.isfinite(cap):
                tag = f"scm.dc_flow.capacity[{_idx(j, t)}]"
                model.add_constr(LinExpr.term(model.var("inv_dc", (j, t)))
                                 - cap * LinExpr.term(y), LE, 0.0, tag)
                tags.append(tag)
            safety = cat.dc_safety.get(j, 0.0)
            if safety > 0:
                tag = f"scm.dc_flow.safety_stock[{_idx(j, t)}]"
                model.add_constr(LinExpr.term(model.var("inv_dc", (j, t)))
                                 - safety * LinExpr.term(y), GE, 0.0, tag)
                tags.append(tag)
    return tags


def build_dc_flow_aggregated(model: Model, inst: Instance,
                             lead_time: int | None = None) -> list[str]:
    """Cumulative form of the DC balance: outflow to date is covered by
    initial stock plus lead-time-shifted inflow minus waste to date."""
    ensure_md_flow(model, inst)
    ensure_dv_flow(model, inst)
    tags = []
    cat = inst.catalog
    for j in inst.network.dcs:
        lead = _lead(inst, j, lead_time)
        for t in inst.periods():
            for p in inst.vaccine_ids():
                model.ensure_var("w_dc", (j, p, t))
        init = cat.initial_inventory_dc.get(j, 0.0)
        for p in inst.vaccine_ids():
            suppliers = [i for i in inst.network.manufacturers
                         if p in inst.manufacturer_vaccines(i)]
            for t in inst.periods():
                cutoff = max(t - lead, 0)
                out = quicksum(model.var("x_dv", (j, k, p, tp))
                               for tp in range(1, t + 1)
                               for k in inst.vcs_of_dc(j))
                arrived = quicksum(model.var("x_md", (i, j, p, tp))
                                   for tp in range(1, cutoff + 1)
                                   for i in suppliers)
                wasted = quicksum(model.var("w_dc", (j, p, tp))
                                  for tp in range(1, cutoff + 1))
                tag = f"scm.dc_flow_aggregated.cumulative[{_idx(j, p, t)}]"
                model.add_constr(out - arrived + wasted, LE, init, tag)
                tags.append(tag)
    return tags


def build_cold_chain(model: Model, inst: Instance,
                     strict_passthrough: bool = True) -> list[str]:
    """Three-tier cold storage balances with opening-decision forcing.

    Everything a DC receives in a period leaves for VCs in the same period,
    tier by tier (equality; set strict_passthrough=False for the relaxed
    outflow <= inflow variant).  Very-cold capacity is carved down when an
    ultra-cold unit is added, and an ultra-cold unit can only be attached to
    an otherwise existing DC.
    """
    T = inst.horizon
    ensure_dv_flow(model, inst)
    tags = []
    cat = inst.catalog
    big_m = inst.big_m()
    for i in inst.network.manufacturers:
        for j in inst.network.dcs:
            for t in inst.periods():
                for tp in range(1, t + 1):
                    model.ensure_var("x_md_order", (i, j, tp, t))
    for j in inst.network.dcs:
        for tier in ("y_dc_cold", "y_dc_vcold", "y_dc_ucold"):
            model.ensure_var(tier, (j,), BINARY)

    def tier_of_vaccine(p: str) -> str:
        v = inst.vaccine(p)
        if v.needs_ultra_cold:
            return "ucold"
        if v.needs_very_cold:
            return "vcold"
        return "cold"

    def tier_of_manufacturer(i: str) -> str:
        if inst.manufacturer_needs_ultra_cold(i):
            return "ucold"
        if inst.manufacturer_needs_very_cold(i):
            return "vcold"
        return "cold"

    for j in inst.network.dcs:
        y_c = model.var("y_dc_cold", (j,))
        y_v = model.var("y_dc_vcold", (j,))
        y_u = model.var("y_dc_ucold", (j,))
        for t in inst.periods():
            for tier, y_open in (("cold", y_c), ("vcold", y_v), ("ucold", y_u)):
                inflow = quicksum(
                    model.var("x_md_order", (i, j, tp, t))
                    for i in inst.network.manufacturers
                    if tier_of_manufacturer(i) == tier
                    for tp in range(1, t + 1))
                outflow = quicksum(
                    model.var("x_dv", (j, k, p, t))
                    for p in inst.vaccine_ids() if tier_of_vaccine(p) == tier
                    for k in inst.vcs_of_dc(j))
                sense = EQ if strict_passthrough else GE
                tag = f"scm.cold_chain.pass_through_{tier}[{_idx(j, t)}]"
                model.add_constr(inflow - outflow, sense, 0.0, tag)
                tags.append(tag)
                if tier == "cold":
                    cap = cat.dc_cold.get(j, math.inf)
                    if math.isfinite(cap):
                        tag = f"scm.cold_chain.cap_cold[{_idx(j, t)}]"
                        model.add_constr(outflow - cap * LinExpr.term(y_open),
                                         LE, 0.0, tag)
                        tags.append(tag)
                elif tier == "vcold":
                    cap = cat.dc_very_cold.get(j, math.inf)
                    if math.isfinite(cap):
                        carve = cat.dc_ultra_cold.get(j, 0.0)
                        carve = carve if math.isfinite(carve) else 0.0
                        tag = f"scm.cold_chain.cap_vcold[{_idx(j, t)}]"
                        model.add_constr(outflow + carve * LinExpr.term(y_u),
                                         LE, cap, tag)
                        tags.append(tag)
                else:
                    cap = cat.dc_ultra_cold.get(j, math.inf)
                    if math.isfinite(cap):
                        tag = f"scm.cold_chain.cap_ucold[{_idx(j, t)}]"
                        model.add_constr(outflow - cap * LinExpr.term(y_u),
                                         LE, 0.0, tag)
                        tags.append(tag)
        # per-flow forcing to the tier opening decisions
        for k in inst.vcs_of_dc(j):
            for p in inst.vaccine_ids():
                y_tier = {"cold": y_c, "vcold": y_v,
                          "ucold": y_u}[tier_of_vaccine(p)]
                for t in inst.periods():
                    x = model.var("x_dv", (j, k, p, t))
                    tag = f"scm.cold_chain.outflow_force[{_idx(j, k, p, t)}]"
                    model.add_constr(LinExpr.term(x)
                                     - big_m * LinExpr.term(y_tier),
                                     LE, 0.0, tag)
                    tags.append(tag)
        for i in inst.network.manufacturers:
            y_tier = {"cold": y_c, "vcold": y_v,
                      "ucold": y_u}[tier_of_manufacturer(i)]
            for t in inst.periods():
                for tp in range(1, t + 1):
                    x = model.var("x_md_order", (i, j, tp, t))
                    tag = f"scm.cold_chain.inflow_force[{_idx(i, j, tp, t)}]"
                    model.add_constr(LinExpr.term(x)
                                     - big_m * LinExpr.term(y_tier),
                                     LE, 0.0, tag)
                    tags.append(tag)
        tag = f"scm.cold_chain.ucold_on_existing[{j}]"
        model.add_constr(LinExpr.term(y_u) - LinExpr.term(y_c)
                         - LinExpr.term(y_v), LE, 0.0, tag)
        tags.append(tag)
    return tags


def build_fleet_capacity(model: Model, inst: Instance) -> list[str]:
    """Aggregate fleet availability: total DC->VC movement per period."""
    if not math.isfinite(inst.catalog.fleet_capacity):
        raise BuilderError("fleet capacity is missing")
    ensure_dv_flow(model, inst)
    tags = []
    for t in inst.periods():
        expr = quicksum(model.var("x_dv", (j, k, p, t))
                        for j in inst.network.dcs
                        for k in inst.vcs_of_dc(j)
                        for p in inst.vaccine_ids())
        tag = f"scm.fleet.capacity[{t}]"
        model.add_constr(expr, LE, inst.catalog.fleet_capacity, tag)
        tags.append(tag)
    return tags


# -- vaccination centers ---------------------------------------------------------


def _vc_demand(inst: Instance, k: str, p: str, t: int) -> float:
    return inst.catalog.demand_by_vc.get((k, p, t), 0.0)


def build_vc_flow(model: Model, inst: Instance, scarcity: bool = False,
                  le_form: bool = False) -> list[str]:
    """VC inventory conservation; demand is (vc, vaccine, period) keyed.

    With scarcity=False the demand outflow is fixed (infeasible when supply
    cannot cover it -- documented behavior).  With scarcity=True vaccination
    becomes a decision and vaccination + shortage = demand is added per cell
    (or vaccination <= demand when le_form is set).
    """
    cat = inst.catalog
    if not cat.demand_by_vc and cat.demand_by_group:
        raise BuilderError(
            "vc_flow consumes (vc,vaccine,t) demand; aggregate by_group first")
    ensure_dv_flow(model, inst)
    tags = []
    for k in inst.network.vcs:
        for t in inst.periods():
            model.ensure_var("inv_vc", (k, t))
            for p in inst.vaccine_ids():
                model.ensure_var("w_vc", (k, p, t))
                if scarcity:
                    model.ensure_var("x_v", (k, p, t))
                    if not le_form:
                        model.ensure_var("s_v", (k, p, t))
    for k in inst.network.vcs:
        init = sum(cat.initial_inventory_vc.get((k, p), 0.0)
                   for p in inst.vaccine_ids())
        for t in inst.periods():
            inflow = quicksum(_dv_inflow(model, inst, k, p, t)
                              for p in inst.vaccine_ids())
            waste = quicksum(model.var("w_vc", (k, p, t))
                             for p in inst.vaccine_ids())
            prev = (LinExpr.term(model.var("inv_vc", (k, t - 1)))
                    if t > 1 else LinExpr.const(init))
            balance = (LinExpr.term(model.var("inv_vc", (k, t)))
                       - prev - inflow + waste)
            if scarcity:
                balance = balance + quicksum(model.var("x_v", (k, p, t))
                                             for p in inst.vaccine_ids())
                rhs = 0.0
            else:
                rhs = -sum(_vc_demand(inst, k, p, t)
                           for p in inst.vaccine_ids())
            tag = f"scm.vc_flow.balance[{_idx(k, t)}]"
            model.add_constr(balance, EQ, rhs, tag)
            tags.append(tag)
            if scarcity:
                for p in inst.vaccine_ids():
                    d = _vc_demand(inst, k, p, t)
                    x = model.var("x_v", (k, p, t))
                    if le_form:
                        tag = f"scm.vc_flow.demand_cap[{_idx(k, p, t)}]"
                        model.add_constr(LinExpr.term(x), LE, d, tag)
                    else:
                        s = model.var("s_v", (k, p, t))
                        tag = f"scm.vc_flow.demand_split[{_idx(k, p, t)}]"
                        model.add_constr(LinExpr.term(x) + LinExpr.term(s),
                                         EQ, d, tag)
                    tags.append(tag)
    return tags


def build_dc_vc_assignment(model: Model, inst: Instance,
                           mode: str = "direct") -> list[str]:
    """DC-VC linkage: direct pairwise forcing, set cover, or set packing."""
    if mode not in ("direct", "cover", "packing"):
        raise BuilderError(f"unknown assignment mode {mode!r}")
    tags = []
    cat = inst.catalog
    for j in inst.network.dcs:
        for k in inst.vcs_of_dc(j):
            model.ensure_var("assign_jk", (j, k), BINARY)
    if mode == "direct":
        ensure_dv_flow(model, inst)
        big_m = inst.big_m()
        for j in inst.network.dcs:
            for k in inst.vcs_of_dc(j):
                flow = quicksum(model.var("x_dv", (j, k, p, t))
                                for p in inst.vaccine_ids()
                                for t in inst.periods())
                a = model.var("assign_jk", (j, k))
                tag = f"scm.assignment.direct[{_idx(j, k)}]"
                model.add_constr(flow - big_m * LinExpr.term(a), LE, 0.0, tag)
                tags.append(tag)
        return tags
    for k in inst.network.vcs:
        expr = LinExpr()
        for j in inst.network.dcs:
            if k not in inst.vcs_of_dc(j):
                continue
            a = inst.assignment_allowed(cat.assign_vc_dc, (k, j))
            if a:
                expr = expr + a * LinExpr.term(model.var("assign_jk", (j, k)))
        if mode == "cover":
            tag = f"scm.assignment.cover[{k}]"
            model.add_constr(expr, GE, 1.0, tag)
        else:
            tag = f"scm.assignment.packing[{k}]"
            model.add_constr(expr, LE, 1.0, tag)
        tags.append(tag)
    return tags


def build_workforce(model: Model, inst: Instance) -> list[str]:
    """Healthcare staffing: service rate per worker plus hiring linkage."""
    cat = inst.catalog
    if cat.worker_rate is None:
        raise BuilderError("worker service rate (people per worker) missing")
    if cat.worker_rate <= 0:
        raise BuilderError("worker service rate must be positive")
    tags = []
    for k in inst.network.vcs:
        for t in inst.periods():
            model.ensure_var("staff_req", (k, t), INTEGER)
            model.ensure_var("staff_extra", (k, t), INTEGER)
            for g in inst.network.groups:
                for p in inst.vaccine_ids():
                    model.ensure_var("x_v_g", (g, k, p, t))
    for k in inst.network.vcs:
        for t in inst.periods():
            served = quicksum(model.var("x_v_g", (g, k, p, t))
                              for g in inst.network.groups
                              for p in inst.vaccine_ids())
            req = model.var("staff_req", (k, t))
            extra = model.var("staff_extra", (k, t))
            tag = f"scm.workforce.capacity[{_idx(k, t)}]"
            model.add_constr(served - cat.worker_rate * LinExpr.term(req),
                             LE, 0.0, tag)
            tags.append(tag)
            tag = f"scm.workforce.hiring[{_idx(k, t)}]"
            model.add_constr(LinExpr.term(req) - LinExpr.term(extra), LE,
                             cat.existing_staff.get((k, t), 0.0), tag)
            tags.append(tag)
    return tags


def build_shelf_life(model: Model, inst: Instance) -> list[str]:
    """Vial shelf-life bookkeeping: receipts at t open within (t, t+shelf].

    Covers the in-horizon window, the truncated end-of-horizon family, the
    opened-vial accounting (with the initial-stock variant for early periods)
    and the split of initial inventory into openable and expiring vials.
    Windows are truncated by the horizon during index generation.
    """
    T = inst.horizon
    ensure_dv_flow(model, inst)
    tags = []
    cat = inst.catalog
    for k in inst.network.vcs:
        for p in inst.vaccine_ids():
            sl = inst.vaccine(p).shelf_life
            if sl < 1:
                raise BuilderError(f"shelf life below 1 for vaccine {p}")
            for t in inst.periods():
                model.ensure_var("w_vc", (k, p, t))
                model.ensure_var("opened", (k, p, t))
                for tp in range(t + 1, min(t + sl, T) + 1):
                    model.ensure_var("open_alloc", (k, p, t, tp))
            for tp in range(1, min(sl, T) + 1):
                model.ensure_var("init_open", (k, p, tp))
                model.ensure_var("init_waste", (k, p, tp))
    for k in inst.network.vcs:
        for p in inst.vaccine_ids():
            sl = inst.vaccine(p).shelf_life
            for t in inst.periods():
                received = _dv_inflow(model, inst, k, p, t)
                w = model.var("w_vc", (k, p, t))
                window = quicksum(
                    model.var("open_alloc", (k, p, t, tp))
                    for tp in range(t + 1, min(t + sl, T) + 1))
                if t <= T - sl:
                    tag = f"scm.shelf_life.window[{_idx(k, p, t)}]"
                    model.add_constr(window - received + LinExpr.term(w),
                                     EQ, 0.0, tag)
                else:
                    tag = f"scm.shelf_life.window_tail[{_idx(k, p, t)}]"
                    model.add_constr(window - received + LinExpr.term(w),
                                     LE, 0.0, tag)
                tags.append(tag)
            for tp in inst.periods():
                received = quicksum(
                    model.var("open_alloc", (k, p, t, tp))
                    for t in range(max(tp - sl, 1), tp))
                opened = model.var("opened", (k, p, tp))
                if tp > sl:
                    tag = f"scm.shelf_life.opened[{_idx(k, p, tp)}]"
                    model.add_constr(LinExpr.term(opened) - received,
                                     EQ, 0.0, tag)
                else:
                    a0 = model.var("init_open", (k, p, tp))
                    tag = f"scm.shelf_life.opened_initial[{_idx(k, p, tp)}]"
                    model.add_constr(LinExpr.term(opened) - received
                                     - LinExpr.term(a0), EQ, 0.0, tag)
                tags.append(tag)
            split = quicksum(
                LinExpr.term(model.var("init_open", (k, p, tp)))
                + LinExpr.term(model.var("init_waste", (k, p, tp)))
                for tp in range(1, min(sl, T) + 1))
            tag = f"scm.shelf_life.initial_split[{_idx(k, p)}]"
            model.add_constr(split, EQ,
                             cat.initial_inventory_vc.get((k, p), 0.0), tag)
            tags.append(tag)
    return tags


def build_vial_dose_balance(model: Model, inst: Instance) -> list[str]:
    """Doses in opened vials split into vaccinations and open-vial waste."""
    tags = []
    sizes = [int(n) for n in inst.catalog.vial_sizes] or \
        sorted({v.doses_per_vial for v in inst.vaccines})
    for k in inst.network.vcs:
        for p in inst.vaccine_ids():
            for t in inst.periods():
                model.ensure_var("w_ov", (k, p, t))
                for n in sizes:
                    model.ensure_var("opened_sized", (n, k, p, t))
                for g in inst.network.groups:
                    model.ensure_var("x_v_g", (g, k, p, t))
    for k in inst.network.vcs:
        for p in inst.vaccine_ids():
            for t in inst.periods():
                doses = quicksum(n * LinExpr.term(
                    model.var("opened_sized", (n, k, p, t))) for n in sizes)
                given = quicksum(model.var("x_v_g", (g, k, p, t))
                                 for g in inst.network.groups)
                w = model.var("w_ov", (k, p, t))
                tag = f"scm.vial_dose.balance[{_idx(k, p, t)}]"
                model.add_constr(doses - given - LinExpr.term(w), EQ, 0.0, tag)
                tags.append(tag)
    return tags


def build_open_vial_window(model: Model, inst: Instance) -> list[str]:
    """Open-vial usable-life accounting around opening and vaccination times.

    Doses from a vial opened at t are administered within [t, t+life-1] or
    expire; looking backward from a vaccination period, doses given plus
    open-vial waste stay within demand (early periods) or close exactly with
    shortage (later periods).  Demand is (group, vc, vaccine, t) keyed.
    """
    cat = inst.catalog
    if not cat.demand_by_group and cat.demand_by_vc:
        raise BuilderError(
            "open_vial_window consumes (g,vc,vaccine,t) demand")
    T = inst.horizon
    tags = []
    sizes = [int(n) for n in cat.vial_sizes] or \
        sorted({v.doses_per_vial for v in inst.vaccines})
    groups = inst.network.groups
    for k in inst.network.vcs:
        for p in inst.vaccine_ids():
            life = inst.vaccine(p).open_vial_life
            if life < 1:
                raise BuilderError(f"open-vial life below 1 for vaccine {p}")
            for t in inst.periods():
                model.ensure_var("w_ov", (k, p, t))
                model.ensure_var("dose_expiry", (k, p, t))
                for n in sizes:
                    model.ensure_var("opened_sized", (n, k, p, t))
                for g in groups:
                    model.ensure_var("s_v_g", (g, k, p, t))
                    for tp in range(t, min(t + life - 1, T) + 1):
                        model.ensure_var("dose_admin", (g, k, p, t, tp))
    for k in inst.network.vcs:
        for p in inst.vaccine_ids():
            life = inst.vaccine(p).open_vial_life
            for t in inst.periods():
                content = quicksum(n * LinExpr.term(
                    model.var("opened_sized", (n, k, p, t))) for n in sizes)
                given = quicksum(
                    model.var("dose_admin", (g, k, p, t, tp))
                    for g in groups
                    for tp in range(t, min(t + life - 1, T) + 1))
                if t <= T - life + 1:
                    exp = model.var("dose_expiry", (k, p, t))
                    tag = f"scm.open_vial.forward[{_idx(k, p, t)}]"
                    model.add_constr(given + LinExpr.term(exp) - content,
                                     EQ, 0.0, tag)
                else:
                    tag = f"scm.open_vial.forward_tail[{_idx(k, p, t)}]"
                    model.add_constr(given - content, LE, 0.0, tag)
                tags.append(tag)
            for tp in inst.periods():
                given = quicksum(
                    model.var("dose_admin", (g, k, p, t, tp))
                    for g in groups
                    for t in range(max(tp - life + 1, 1), tp + 1))
                demand = sum(cat.demand_by_group.get((g, k, p, tp), 0.0)
                             for g in groups)
                if tp <= life:
                    w = model.var("w_ov", (k, p, tp))
                    tag = f"scm.open_vial.backward_early[{_idx(k, p, tp)}]"
                    model.add_constr(given + LinExpr.term(w), LE, demand, tag)
                else:
                    short = quicksum(model.var("s_v_g", (g, k, p, tp))
                                     for g in groups)
                    tag = f"scm.open_vial.backward_late[{_idx(k, p, tp)}]"
                    model.add_constr(given + short, EQ, demand, tag)
                tags.append(tag)
    return tags


def build_priority_sequencing(model: Model, inst: Instance) -> list[str]:
    """Two priority groups: the low group is served only from what remains
    after the high group's demand is met, period by period.

    Lateral VC-VC transshipment enters availability only in the first period;
    remaining vaccines carry over through the inventory recurrence.
    """
    groups = inst.network.groups
    if len(groups) != 2:
        raise BuilderError(
            f"priority sequencing needs exactly two groups, got {len(groups)}")
    g_hi, g_lo = groups
    cat = inst.catalog
    if not cat.demand_by_group:
        raise BuilderError(
            "priority sequencing consumes (g,vc,vaccine,t) demand")
    T = inst.horizon
    ensure_dv_flow(model, inst)
    tags = []
    big = inst.big_m() + inst.total_demand() + 1.0
    for k in inst.network.vcs:
        for t in inst.periods():
            model.ensure_var("inv_vc", (k, t))
            for p in inst.vaccine_ids():
                model.ensure_var("w_vc", (k, p, t))
                for g in groups:
                    model.ensure_var("y_v", (g, k, p, t))
        for kp in inst.network.vcs:
            if kp != k:
                for p in inst.vaccine_ids():
                    model.ensure_var("x_vv", (k, kp, p, 1))
    for k in inst.network.vcs:
        others = [kp for kp in inst.network.vcs if kp != k]
        init = sum(cat.initial_inventory_vc.get((k, p), 0.0)
                   for p in inst.vaccine_ids())
        for p in inst.vaccine_ids():
            for t in inst.periods():
                inflow = _dv_inflow(model, inst, k, p, t)
                w = model.var("w_vc", (k, p, t))
                if t == 1:
                    lateral_in = quicksum(model.var("x_vv", (kp, k, p, 1))
                                          for kp in others)
                    lateral_out = quicksum(model.var("x_vv", (k, kp, p, 1))
                                           for kp in others)
                    avail = (LinExpr.const(init) + inflow + lateral_in
                             - lateral_out - LinExpr.term(w))
                else:
                    avail = (LinExpr.term(model.var("inv_vc", (k, t - 1)))
                             + inflow - LinExpr.term(w))
                d_hi = cat.demand_by_group.get((g_hi, k, p, t), 0.0)
                d_lo = cat.demand_by_group.get((g_lo, k, p, t), 0.0)
                y_hi = model.var("y_v", (g_hi, k, p, t))
                y_lo = model.var("y_v", (g_lo, k, p, t))
                hi_tag = f"scm.priority.high[{_idx(k, p, t)}]"
                lo_tag = f"scm.priority.low[{_idx(k, p, t)}]"
                model.linearize_min(y_hi, LinExpr.const(d_hi), avail,
                                    big, big, tag=hi_tag)
                model.linearize_min(y_lo, LinExpr.const(d_lo),
                                    avail - LinExpr.term(y_hi), big, big,
                                    tag=lo_tag)
                tags.extend(f"{base}.{part}" for base in (hi_tag, lo_tag)
                            for part in ("ub_a", "ub_b", "lb_a", "lb_b"))
        # carry-over: end inventory = availability minus fulfilment, all p
        for t in inst.periods():
            inflow = quicksum(_dv_inflow(model, inst, k, p, t)
                              for p in inst.vaccine_ids())
            waste = quicksum(model.var("w_vc", (k, p, t))
                             for p in inst.vaccine_ids())
            served = quicksum(model.var("y_v", (g, k, p, t))
                              for g in groups for p in inst.vaccine_ids())
            if t == 1:
                lateral_in = quicksum(model.var("x_vv", (kp, k, p, 1))
                                      for kp in others
                                      for p in inst.vaccine_ids())
                lateral_out = quicksum(model.var("x_vv", (k, kp, p, 1))
                                       for kp in others
                                       for p in inst.vaccine_ids())
                prev = LinExpr.const(init) + lateral_in - lateral_out
            else:
                prev = LinExpr.term(model.var("inv_vc", (k, t - 1)))
            balance = (LinExpr.term(model.var("inv_vc", (k, t))) - prev
                       - inflow + waste + served)
            tag = f"scm.priority.carryover[{_idx(k, t)}]"
            model.add_constr(balance, EQ, 0.0, tag)
            tags.append(tag)
    return tags


# -- default cost objective ------------------------------------------------------


def build_cost_objective(model: Model, inst: Instance) -> None:
    """Minimize ordering, holding, shortage, waste, hiring and opening costs
    over whichever variable families the composed builders registered."""
    cat = inst.catalog
    expr = LinExpr()
    for v in model.family("x_md"):
        i, j = v.indices[0], v.indices[1]
        expr = expr + cat.ordering_cost.get((i, j), 0.0) * LinExpr.term(v)
    for v in model.family("x_md_order"):
        i, j = v.indices[0], v.indices[1]
        expr = expr + cat.ordering_cost.get((i, j), 0.0) * LinExpr.term(v)
    for v in model.family("inv_dc"):
        expr = expr + cat.holding_cost.get(v.indices[0], 0.0) * LinExpr.term(v)
    for v in model.family("s_v"):
        k, p = v.indices[0], v.indices[1]
        expr = expr + cat.shortage_cost.get((k, p), 1.0) * LinExpr.term(v)
    for v in model.family("s_v_g"):
        k, p = v.indices[1], v.indices[2]
        expr = expr + cat.shortage_cost.get((k, p), 1.0) * LinExpr.term(v)
    for fam in ("w_dc", "w_vc", "w_ov", "init_waste", "dose_expiry"):
        for v in model.family(fam):
            expr = expr + cat.waste_penalty * LinExpr.term(v)
    for v in model.family("staff_extra"):
        expr = expr + cat.hire_cost * LinExpr.term(v)
    for v in model.family("z_vc"):
        expr = expr + cat.vc_open_cost.get(v.indices[0], 0.0) * LinExpr.term(v)
    model.add_objective("min", expr, "cost")
