"""Command-line surface: validate instances, compose formulations, solve,
simulate, and export models.

Formulation names map one-to-one onto builder operations; composition is
explicit (no implicit defaults) so every produced model is auditable through
its constraint tags.  Exit codes: 0 optimal/clean, 1 usage or validation
failure, 2 infeasible, 3 node/iteration limit, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import epi, equity, location, routing, scm, solve as solver, uncertainty
from .instance import Instance, InstanceError, load_instance, validate_instance
from .model import Model, ModelError, export_lp
from .scm import BuilderError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3
EXIT_IO = 4


def _builders() -> dict:
    return {
        "scm.manufacturer_capacity": scm.build_manufacturer_capacity,
        "scm.order_exclusivity": scm.build_order_exclusivity,
        "scm.dc_flow": scm.build_dc_flow,
        "scm.dc_flow_aggregated": scm.build_dc_flow_aggregated,
        "scm.cold_chain": scm.build_cold_chain,
        "scm.fleet_capacity": scm.build_fleet_capacity,
        "scm.vc_flow": lambda m, i: scm.build_vc_flow(m, i, scarcity=True),
        "scm.vc_flow_fixed": lambda m, i: scm.build_vc_flow(m, i,
                                                            scarcity=False),
        "scm.assignment_direct":
            lambda m, i: scm.build_dc_vc_assignment(m, i, "direct"),
        "scm.assignment_cover":
            lambda m, i: scm.build_dc_vc_assignment(m, i, "cover"),
        "scm.assignment_packing":
            lambda m, i: scm.build_dc_vc_assignment(m, i, "packing"),
        "scm.workforce": scm.build_workforce,
        "scm.shelf_life": scm.build_shelf_life,
        "scm.vial_dose_balance": scm.build_vial_dose_balance,
        "scm.open_vial_window": scm.build_open_vial_window,
        "scm.priority_sequencing": scm.build_priority_sequencing,
        "location.assignment":
            lambda m, i: location.build_assignment_location(m, i,
                                                            "fractional"),
        "location.assignment_binary":
            lambda m, i: location.build_assignment_location(m, i, "binary"),
        "location.max_coverage": location.build_max_coverage,
        "location.stepwise_coverage": location.build_stepwise_coverage,
        "location.outreach": location.build_outreach,
        "routing.vrp_dfj": lambda m, i: routing.build_vrp(m, i, "dfj_lazy"),
        "routing.vrp_mtz": lambda m, i: routing.build_vrp(m, i, "mtz"),
        "equity.maximin": equity.build_maximin_satisfaction,
        "equity.min_rate": equity.build_min_satisfaction_rate,
        "equity.deviation": equity.build_deviation_equity,
        "equity.carbon": equity.build_carbon_objective,
        "uncertainty.cc_supply":
            lambda m, i: uncertainty.build_cc_constraints(m, i, "supply"),
        "uncertainty.cc_vehicle":
            lambda m, i: uncertainty.build_cc_constraints(m, i, "vehicle"),
    }


_OBJECTIVES = ("cost", "carbon", "keep")


def _parse_epsilon(pairs: list[str]) -> dict[str, float]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise BuilderError(f"epsilon bounds look like name=value, "
                               f"got {pair!r}")
        name, value = pair.split("=", 1)
        out[name.strip()] = float(value)
    return out


def _compose(inst: Instance, names: list[str], first_stage: list[str],
             mode: str) -> Model:
    registry = _builders()
    unknown = [n for n in names + first_stage if n not in registry]
    if unknown:
        raise BuilderError(
            f"unknown formulation name(s) {unknown}; valid names: "
            + ", ".join(sorted(registry)))
    model = Model("composition")
    if mode == "none":
        for name in names:
            registry[name](model, inst)
        return model
    if mode == "tssp":
        fs = [registry[n] for n in first_stage]
        ss = [registry[n] for n in names if n not in first_stage]
        ss.append(lambda m, i: scm.build_cost_objective(m, i))
        uncertainty.build_tssp_extensive(model, inst, fs, ss)
        return model
    if mode == "robust":
        if inst.scenario_set is None:
            raise BuilderError("robust mode needs a scenario block")
        fs = [registry[n] for n in first_stage]
        ss = [registry[n] for n in names if n not in first_stage]
        exprs: dict = {}
        for b in fs:
            b(model, inst)
        first_families = set(model.families())
        model.objectives = []
        for scen in inst.scenario_set.scenarios:
            scope = uncertainty.ScenarioScope(model, scen.id, first_families)
            scen_inst = inst.with_scenario(scen)
            for b in ss:
                b(scope, scen_inst)
            scm.build_cost_objective(scope, scen_inst)
            exprs[scen.id] = scope.captured[-1][1]
        uncertainty.build_robust_mean_deviation(model, inst, exprs)
        return model
    raise BuilderError(f"unknown uncertainty mode {mode!r}")


def _attach_objective(model: Model, inst: Instance, objective: str,
                      eps: dict[str, float]) -> Model:
    if objective == "cost" and not model.objectives:
        scm.build_cost_objective(model, inst)
    elif objective == "carbon" and not model.objectives:
        equity.build_carbon_objective(model, inst)
    if not model.objectives:
        scm.build_cost_objective(model, inst)
    if len(model.objectives) == 1:
        return model
    names = [o.name for o in model.objectives]
    keep = objective if objective in names else names[0]
    missing = [n for n in names if n != keep and n not in eps]
    if missing:
        raise BuilderError(
            f"model has objectives {names}; pass --epsilon bounds for "
            f"{missing} (keeping {keep!r}) or choose --objective")
    return equity.epsilon_constraint_scalarize(model, keep, eps)


def cmd_validate(args) -> int:
    try:
        inst = load_instance(args.instance)
    except InstanceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO if exc.kind == "io" else EXIT_USAGE
    violations = validate_instance(inst)
    for v in violations:
        print(str(v))
    if violations:
        return EXIT_USAGE
    print("instance ok")
    return EXIT_OK


def _status_code(status: str) -> int:
    if status == solver.OPTIMAL:
        return EXIT_OK
    if status == solver.INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
    except InstanceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO if exc.kind == "io" else EXIT_USAGE
    names = [n.strip() for n in args.formulation.split(",") if n.strip()]
    first_stage = [n.strip() for n in (args.first_stage or "").split(",")
                   if n.strip()]
    eps = _parse_epsilon(args.epsilon)
    model = _compose(inst, names, first_stage, args.uncertainty)
    multi = [o.name for o in model.objectives]
    scalar = _attach_objective(model, inst, args.objective, eps)
    os.makedirs(args.out, exist_ok=True)
    if any(n.startswith("routing.vrp") for n in names):
        sol = routing.solve_routing(scalar, inst, rel_gap=args.gap,
                                    node_limit=args.node_limit)
    else:
        sol = solver.solve_milp(scalar, rel_gap=args.gap,
                                node_limit=args.node_limit)
    sol.to_csv(os.path.join(args.out, "solution.csv"))
    report = solver.audit(scalar, sol, inst)
    report.to_csv(os.path.join(args.out, "audit.csv"))
    if args.sweep:
        grids = {}
        for spec in args.sweep:
            name, rng = spec.split("=", 1)
            lo, hi, count = rng.split(":")
            n = int(count)
            step = (float(hi) - float(lo)) / max(n - 1, 1)
            grids[name.strip()] = [float(lo) + step * i for i in range(n)]
        rows = equity.pareto_sweep(model, args.objective
                                   if args.objective in multi else multi[0],
                                   grids)
        equity.pareto_csv(rows, os.path.join(args.out, "pareto.csv"))
    print(f"status: {sol.status}")
    if sol.objective is not None:
        print(f"objective: {sol.objective:.9g}")
    if sol.gap is not None:
        print(f"gap: {sol.gap:.3g}")
    print(f"max residual: {report.max_residual:.3g}")
    return _status_code(sol.status)


def cmd_simulate(args) -> int:
    try:
        inst = load_instance(args.instance)
    except InstanceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO if exc.kind == "io" else EXIT_USAGE
    if args.dt <= 0:
        print("dt must be positive", file=sys.stderr)
        return EXIT_USAGE
    params = epi.params_from_instance(inst)
    initial = epi.initial_state_from_instance(inst)
    plan = {}
    if args.plan and args.plan != "none":
        try:
            with open(args.plan, encoding="utf-8") as fh:
                for rec in json.load(fh):
                    plan[(str(rec["region"]), str(rec["group"]),
                          int(rec["t"]))] = float(rec["value"])
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_IO
    state = epi.simulate_delphi_v(params, initial, plan, inst.horizon,
                                  dt=args.dt)
    epi.trajectory_csv(state, args.out)
    print(f"trajectory written to {args.out}")
    print(f"total deaths: {state.total_deaths():.6g}")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    try:
        inst = load_instance(args.instance)
    except InstanceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO if exc.kind == "io" else EXIT_USAGE
    names = [n.strip() for n in args.formulation.split(",") if n.strip()]
    eps = _parse_epsilon(args.epsilon)
    model = _compose(inst, names, [], "none")
    scalar = _attach_objective(model, inst, args.objective, eps)
    export_lp(scalar, args.out)
    print(f"model written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    names = "\n  ".join(sorted(_builders()))
    parser = argparse.ArgumentParser(
        prog="vaxopt",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Vaccine supply chain optimization toolkit.",
        epilog=f"registered formulation names:\n  {names}\n")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("instance")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("solve", help="compose formulations and solve",
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       epilog=f"registered formulation names:\n  {names}\n")
    p.add_argument("instance")
    p.add_argument("--formulation", required=True,
                   help="comma list of builder names")
    p.add_argument("--objective", default="cost",
                   help="objective to keep (cost, carbon, or a registered "
                        "objective name)")
    p.add_argument("--epsilon", action="append", metavar="NAME=VALUE",
                   help="bound for a demoted objective")
    p.add_argument("--sweep", action="append", metavar="NAME=LO:HI:N",
                   help="epsilon sweep grid; writes pareto.csv")
    p.add_argument("--uncertainty", default="none",
                   choices=["none", "tssp", "robust"])
    p.add_argument("--first-stage", default="",
                   help="builders treated as first-stage under tssp/robust")
    p.add_argument("--gap", type=float, default=1e-6)
    p.add_argument("--node-limit", type=int, default=20000)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("simulate", help="run the epidemic simulator")
    p.add_argument("instance")
    p.add_argument("--plan", default="none",
                   help="JSON list of {region, group, t, value} records")
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--out", default="trajectory.csv")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("export-lp", help="write the composed model as LP text")
    p.add_argument("instance")
    p.add_argument("--formulation", required=True)
    p.add_argument("--objective", default="cost")
    p.add_argument("--epsilon", action="append", metavar="NAME=VALUE")
    p.add_argument("--out", default="model.lp")
    p.set_defaults(fn=cmd_export_lp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (BuilderError, ModelError, uncertainty.AmbiguityError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
