"""Facility location and coverage builders for siting vaccination centers.

Population sites are the demand side; candidate vaccination centers are the
facilities.  The bi-objective assignment model registers both of its
objectives; scalarize through the multi-objective tools before solving.

Families: z_vc[k] site-opening binaries, assign_sk[s,k] assignments,
covered[s] plain coverage, covered_q[s,q] step-wise level coverage,
oc_serves[l,k] outreach-team assignments.
"""

from __future__ import annotations

import math

from .instance import Instance
from .model import BINARY, EQ, GE, LE, LinExpr, Model, quicksum
from .scm import BuilderError, _idx


def _site_level(inst: Instance, s: str, k: str) -> int | None:
    """Distance band of candidate k for site s, ties to the better level.

    Bands are right-closed: level q covers distances up to the q-th
    breakpoint; a distance sitting exactly on a breakpoint belongs to the
    earlier (better) band.
    """
    d = inst.distance(s, k)
    for q, cut in enumerate(inst.catalog.level_distance):
        if d <= cut:
            return q
    return None


def build_assignment_location(model: Model, inst: Instance,
                              assignment: str = "fractional") -> list[str]:
    """Site-to-center assignment with coverage and distance objectives.

    Registers objective "coverage" (maximize assigned demand) and objective
    "distance" (minimize demand-weighted distance).  Fractional mode keeps
    assignments in [0,1]; binary mode makes them all-or-nothing.
    """
    if assignment not in ("fractional", "binary"):
        raise BuilderError(f"unknown assignment mode {assignment!r}")
    cat = inst.catalog
    if cat.max_open_vcs is not None and cat.max_open_vcs < 1:
        raise BuilderError("at least one vaccination center must be allowed")
    tags = []
    sites = inst.network.sites
    vcs = inst.network.vcs
    for k in vcs:
        model.ensure_var("z_vc", (k,), BINARY)
    dom = BINARY if assignment == "binary" else "continuous"
    for s in sites:
        for k in vcs:
            model.ensure_var("assign_sk", (s, k), dom, 0.0, 1.0)
    coverage = LinExpr()
    weighted_distance = LinExpr()
    for s in sites:
        d_s = cat.site_demand.get(s, 0.0)
        expr = quicksum(model.var("assign_sk", (s, k)) for k in vcs)
        tag = f"location.assignment.single[{s}]"
        model.add_constr(expr, LE, 1.0, tag)
        tags.append(tag)
        for k in vcs:
            x = model.var("assign_sk", (s, k))
            coverage = coverage + d_s * LinExpr.term(x)
            dist = inst.distance(s, k)
            if math.isfinite(dist):
                weighted_distance = weighted_distance \
                    + d_s * dist * LinExpr.term(x)
            tag = f"location.assignment.open[{_idx(s, k)}]"
            model.add_constr(LinExpr.term(x)
                             - LinExpr.term(model.var("z_vc", (k,))),
                             LE, 0.0, tag)
            tags.append(tag)
            viable = inst.assignment_allowed(cat.assign_site_vc, (s, k))
            tag = f"location.assignment.viability[{_idx(s, k)}]"
            model.add_constr(LinExpr.term(x), LE, viable, tag)
            tags.append(tag)
    for k in vcs:
        cap = cat.vc_capacity.get(k, math.inf)
        if math.isfinite(cap):
            expr = quicksum(cat.site_demand.get(s, 0.0)
                            * LinExpr.term(model.var("assign_sk", (s, k)))
                            for s in sites)
            tag = f"location.assignment.capacity[{k}]"
            model.add_constr(expr, LE, cap, tag)
            tags.append(tag)
    if cat.max_open_vcs is not None:
        tag = "location.assignment.cardinality"
        model.add_constr(quicksum(model.var("z_vc", (k,)) for k in vcs),
                         LE, float(cat.max_open_vcs), tag)
        tags.append(tag)
    model.add_objective("max", coverage, "coverage")
    model.add_objective("min", weighted_distance, "distance")
    return tags


def build_max_coverage(model: Model, inst: Instance) -> list[str]:
    """Maximal covering location under cardinality and budget caps."""
    cat = inst.catalog
    tags = []
    vcs = inst.network.vcs
    for k in vcs:
        model.ensure_var("z_vc", (k,), BINARY)
    total = LinExpr()
    for s in inst.network.sites:
        z = model.ensure_var("covered", (s,), BINARY)
        total = total + cat.coverage_population.get(s, 0.0) * LinExpr.term(z)
        reachable = [k for k in vcs
                     if inst.distance(s, k) <= cat.max_distance]
        expr = LinExpr.term(z) - quicksum(model.var("z_vc", (k,))
                                          for k in reachable)
        tag = f"location.max_coverage.reach[{s}]"
        model.add_constr(expr, LE, 0.0, tag)
        tags.append(tag)
    if cat.max_open_vcs is not None:
        tag = "location.max_coverage.cardinality"
        model.add_constr(quicksum(model.var("z_vc", (k,)) for k in vcs),
                         LE, float(cat.max_open_vcs), tag)
        tags.append(tag)
    if math.isfinite(cat.budget):
        tag = "location.max_coverage.budget"
        model.add_constr(quicksum(cat.vc_open_cost.get(k, 0.0)
                                  * LinExpr.term(model.var("z_vc", (k,)))
                                  for k in vcs), LE, cat.budget, tag)
        tags.append(tag)
    model.add_objective("max", total, "coverage")
    return tags


def _stepwise_objective(model: Model, inst: Instance) -> LinExpr:
    cat = inst.catalog
    total = LinExpr()
    for s in inst.network.sites:
        pop = cat.coverage_population.get(s, 0.0)
        for q, theta in enumerate(cat.level_fraction):
            z = model.ensure_var("covered_q", (s, q), BINARY)
            total = total + pop * theta * LinExpr.term(z)
    return total


def _check_levels(inst: Instance) -> None:
    cat = inst.catalog
    if not cat.level_fraction or not cat.level_distance:
        raise BuilderError("step-wise coverage needs level fractions "
                           "and distance breakpoints")
    theta = cat.level_fraction
    if any(theta[q] > theta[q - 1] + 1e-12 for q in range(1, len(theta))):
        raise BuilderError("coverage fractions must be nonincreasing")


def build_stepwise_coverage(model: Model, inst: Instance) -> list[str]:
    """Step-wise distance-banded coverage: closer bands cover more."""
    _check_levels(inst)
    cat = inst.catalog
    tags = []
    vcs = inst.network.vcs
    for k in vcs:
        model.ensure_var("z_vc", (k,), BINARY)
    total = _stepwise_objective(model, inst)
    for s in inst.network.sites:
        for q in range(len(cat.level_fraction)):
            members = [k for k in vcs if _site_level(inst, s, k) == q]
            z = model.var("covered_q", (s, q))
            tag = f"location.stepwise.band[{_idx(s, q)}]"
            model.add_constr(LinExpr.term(z)
                             - quicksum(model.var("z_vc", (k,))
                                        for k in members), LE, 0.0, tag)
            tags.append(tag)
        tag = f"location.stepwise.one_band[{s}]"
        model.add_constr(quicksum(model.var("covered_q", (s, q))
                                  for q in range(len(cat.level_fraction))),
                         LE, 1.0, tag)
        tags.append(tag)
    if cat.max_open_vcs is not None:
        tag = "location.stepwise.cardinality"
        model.add_constr(quicksum(model.var("z_vc", (k,)) for k in vcs),
                         LE, float(cat.max_open_vcs), tag)
        tags.append(tag)
    if math.isfinite(cat.budget):
        tag = "location.stepwise.budget"
        model.add_constr(quicksum(cat.vc_open_cost.get(k, 0.0)
                                  * LinExpr.term(model.var("z_vc", (k,)))
                                  for k in vcs), LE, cat.budget, tag)
        tags.append(tag)
    model.add_objective("max", total, "coverage")
    return tags


def build_outreach(model: Model, inst: Instance) -> list[str]:
    """Step-wise coverage driven by outreach teams serving remote centers."""
    _check_levels(inst)
    cat = inst.catalog
    tags = []
    vcs = inst.network.vcs
    ocs = inst.network.outreach
    for ell in ocs:
        for k in vcs:
            model.ensure_var("oc_serves", (ell, k), BINARY)
    total = _stepwise_objective(model, inst)
    for s in inst.network.sites:
        for q in range(len(cat.level_fraction)):
            members = [k for k in vcs if _site_level(inst, s, k) == q]
            z = model.var("covered_q", (s, q))
            served = quicksum(model.var("oc_serves", (ell, k))
                              for k in members for ell in ocs)
            tag = f"location.outreach.band[{_idx(s, q)}]"
            model.add_constr(LinExpr.term(z) - served, LE, 0.0, tag)
            tags.append(tag)
        tag = f"location.outreach.one_band[{s}]"
        model.add_constr(quicksum(model.var("covered_q", (s, q))
                                  for q in range(len(cat.level_fraction))),
                         LE, 1.0, tag)
        tags.append(tag)
    for ell in ocs:
        cap = cat.outreach_capacity.get(ell, math.inf)
        if math.isfinite(cap):
            tag = f"location.outreach.capacity[{ell}]"
            model.add_constr(quicksum(model.var("oc_serves", (ell, k))
                                      for k in vcs), LE, cap, tag)
            tags.append(tag)
        for k in vcs:
            dist = inst.distance(ell, k)
            if dist > cat.max_distance:
                tag = f"location.outreach.range[{_idx(ell, k)}]"
                model.add_constr(
                    LinExpr.term(model.var("oc_serves", (ell, k))),
                    LE, 0.0, tag)
                tags.append(tag)
    for k in vcs:
        tag = f"location.outreach.single_team[{k}]"
        model.add_constr(quicksum(model.var("oc_serves", (ell, k))
                                  for ell in ocs), LE, 1.0, tag)
        tags.append(tag)
    model.add_objective("max", total, "coverage")
    return tags
