"""Desk-scale exact solver and verification oracles.

A dense two-phase primal simplex backs the LP path; mixed-integer models go
through best-bound branch and bound with most-fractional branching.  The
brute-force enumerator provides ground truth for small pure-integer models
and is the oracle used throughout the test suite.  Everything is
deterministic: identical models yield identical solutions and reports.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (BINARY, CONTINUOUS, INF, INTEGER, LE, GE,
                    LinExpr, Model, VarRef, format_number)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

_TOL = 1e-9
_INT_TOL = 1e-6
_DEGENERATE_PIVOTS_BEFORE_BLAND = 1000
_REFACTOR_EVERY = 200


class SolverError(RuntimeError):
    pass


@dataclass
class Solution:
    status: str
    values: dict[VarRef, float] = field(default_factory=dict)
    objective: float | None = None
    bound: float | None = None
    gap: float | None = None
    nodes: int = 0
    residual: float = 0.0

    def __getitem__(self, var: VarRef) -> float:
        return self.values.get(var, 0.0)

    def value(self, expr: LinExpr) -> float:
        return expr.value(self.values)

    def report_lines(self) -> list[str]:
        lines = [f"status {self.status}"]
        if self.objective is not None:
            lines.append(f"objective {format_number(round(self.objective, 9))}")
        if self.gap is not None:
            lines.append(f"gap {format_number(round(self.gap, 9))}")
        for v in sorted(self.values, key=lambda r: r.sort_key()):
            lines.append(f"{v.name} {format_number(round(self.values[v], 9))}")
        return lines

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("family,indices,value\n")
            for v in sorted(self.values, key=lambda r: r.sort_key()):
                idx = ";".join(str(i) for i in v.indices)
                fh.write(f"{v.family},{idx},"
                         f"{format_number(round(self.values[v], 9))}\n")


# -- compilation ---------------------------------------------------------------


class _Compiled:
    """Model flattened to arrays in registration order."""

    def __init__(self, model: Model, objective_index: int = 0):
        self.model = model
        self.vars = model.variables()
        self.index = {v: i for i, v in enumerate(self.vars)}
        n = len(self.vars)
        self.lb = np.array([v.lb for v in self.vars]) if n else np.zeros(0)
        self.ub = np.array([v.ub for v in self.vars]) if n else np.zeros(0)
        if model.objectives:
            if len(model.objectives) != 1 and objective_index == 0:
                raise SolverError(
                    "model has multiple objectives; scalarize before solving")
            obj = model.objectives[objective_index]
            self.sense_mult = 1.0 if obj.sense == "min" else -1.0
            self.c = np.zeros(n)
            for v, coef in obj.expr.coeffs.items():
                self.c[self.index[v]] += self.sense_mult * coef
            self.obj_const = self.sense_mult * obj.expr.constant
        else:
            self.sense_mult = 1.0
            self.c = np.zeros(n)
            self.obj_const = 0.0
        rows, senses, rhs = [], [], []
        for con in model.constraints:
            row = np.zeros(n)
            for v, coef in con.lhs.coeffs.items():
                row[self.index[v]] += coef
            rows.append(row)
            senses.append(con.sense)
            rhs.append(con.rhs - con.lhs.constant)
        self.A = np.array(rows) if rows else np.zeros((0, n))
        self.senses = senses
        self.b = np.array(rhs) if rhs else np.zeros(0)

    def external_objective(self, internal_total: float) -> float:
        """Map a minimized-form value (including constant) to the model sense."""
        return self.sense_mult * internal_total


def _max_residual(model: Model, values: dict[VarRef, float]) -> float:
    return max((c.residual(values) for c in model.constraints), default=0.0)


# -- primal simplex on standard form Ax = b, x >= 0 ----------------------------


class _Tableau:
    """Dense simplex tableau with periodic refactorization."""

    def __init__(self, A: np.ndarray, b: np.ndarray, max_iter: int):
        self.m, self.ncols = A.shape
        self.A0 = A
        self.b0 = b
        self.T = np.hstack([A.copy(), b.reshape(-1, 1).copy()])
        self.basis = [0] * self.m
        self.max_iter = max_iter
        self.pivots = 0

    def refactor(self) -> None:
        B = self.A0[:, self.basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return
        self.T[:, :-1] = Binv @ self.A0
        self.T[:, -1] = Binv @ self.b0

    def pivot(self, i: int, j: int) -> None:
        T = self.T
        T[i, :] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        self.T -= np.outer(col, T[i, :])
        self.basis[i] = j
        self.pivots += 1
        if self.pivots % _REFACTOR_EVERY == 0:
            self.refactor()

    def minimize(self, cost: np.ndarray, allowed: int) -> str:
        """Run simplex on the given cost over columns [0, allowed)."""
        if allowed == 0:
            return OPTIMAL
        degenerate = 0
        while True:
            if self.pivots >= self.max_iter:
                return ITERATION_LIMIT
            cb = cost[self.basis]
            red = cost[:allowed] - cb @ self.T[:, :allowed]
            if degenerate >= _DEGENERATE_PIVOTS_BEFORE_BLAND:
                cand = np.nonzero(red < -_TOL)[0]
                if cand.size == 0:
                    return OPTIMAL
                j = int(cand[0])
            else:
                j = int(np.argmin(red))
                if red[j] >= -_TOL:
                    return OPTIMAL
            col = self.T[:, j]
            pos = col > _TOL
            if not pos.any():
                return UNBOUNDED
            ratios = np.where(pos, self.T[:, -1] / np.where(pos, col, 1.0),
                              np.inf)
            rmin = float(ratios.min())
            ties = np.nonzero(ratios <= rmin + _TOL * (1.0 + abs(rmin)))[0]
            i = int(min(ties, key=lambda r: self.basis[r]))
            degenerate = degenerate + 1 if rmin <= _TOL else 0
            self.pivot(i, j)

    def solution(self, n: int) -> np.ndarray:
        x = np.zeros(self.ncols)
        for i, bi in enumerate(self.basis):
            x[bi] = self.T[i, -1]
        return x[:n]


class _SimplexResult:
    def __init__(self, status, x=None, obj=None, dual_bound=None):
        self.status = status
        self.x = x
        self.obj = obj
        self.dual_bound = dual_bound


def _simplex_standard(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                      max_iter: int) -> _SimplexResult:
    """Two-phase simplex for min cx s.t. Ax = b, x >= 0 with b >= 0."""
    m, n = A.shape
    if m == 0:
        if np.any(c < -_TOL):
            return _SimplexResult(UNBOUNDED)
        return _SimplexResult(OPTIMAL, np.zeros(n), 0.0, 0.0)

    wide = np.hstack([A, np.eye(m)])
    tab = _Tableau(wide, b, max_iter)
    tab.basis = list(range(n, n + m))

    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    status = tab.minimize(cost1, n + m)
    if status == ITERATION_LIMIT:
        return _SimplexResult(ITERATION_LIMIT)
    if status == UNBOUNDED or cost1[tab.basis] @ tab.T[:, -1] > 1e-7:
        return _SimplexResult(INFEASIBLE)

    # drive artificials out of the basis; rows that cannot pivot are redundant
    drop = []
    for i in range(tab.m):
        if tab.basis[i] >= n:
            nz = np.nonzero(np.abs(tab.T[i, :n]) > 1e-8)[0]
            if nz.size:
                tab.pivot(i, int(nz[0]))
            else:
                drop.append(i)
    if drop:
        keep = [i for i in range(tab.m) if i not in drop]
        tab.T = tab.T[keep]
        tab.A0 = tab.A0[keep]
        tab.b0 = tab.b0[keep]
        tab.basis = [tab.basis[i] for i in keep]
        tab.m = len(keep)

    cost2 = np.concatenate([c, np.zeros(tab.A0.shape[1] - n)])
    status = tab.minimize(cost2, n)  # artificial columns cannot re-enter
    if status != OPTIMAL:
        return _SimplexResult(status)
    x = tab.solution(n)
    obj = float(c @ x)
    dual = None
    try:
        B = tab.A0[:, tab.basis]
        y = np.linalg.solve(B.T, cost2[tab.basis])
        dual = float(y @ tab.b0)
    except np.linalg.LinAlgError:
        pass
    return _SimplexResult(OPTIMAL, x, obj, dual)


def _tighten_bounds(comp: _Compiled, lb: np.ndarray, ub: np.ndarray,
                    max_passes: int = 12):
    """Activity-based bound tightening (the only presolve performed).

    Iterates rows, shrinking variable bounds implied by the other terms'
    bound activity.  Collapses pinned equality chains so the simplex never
    sees them; returns None when bounds cross (infeasible).
    """
    rows = []
    for i in range(comp.A.shape[0]):
        nz = np.nonzero(comp.A[i])[0]
        if nz.size:
            rows.append((nz, comp.A[i, nz], comp.senses[i], comp.b[i]))
        elif (comp.senses[i] == LE and comp.b[i] < -1e-9) \
                or (comp.senses[i] == GE and comp.b[i] > 1e-9) \
                or (comp.senses[i] == "=" and abs(comp.b[i]) > 1e-9):
            return None
    for _ in range(max_passes):
        changed = False
        for nz, coefs, sense, rhs in rows:
            lo_terms = np.where(coefs > 0, coefs * lb[nz], coefs * ub[nz])
            hi_terms = np.where(coefs > 0, coefs * ub[nz], coefs * lb[nz])
            min_act = lo_terms.sum()
            max_act = hi_terms.sum()
            for pos, j in enumerate(nz):
                a = coefs[pos]
                if sense in (LE, "=") and np.isfinite(min_act - lo_terms[pos]):
                    room = rhs - (min_act - lo_terms[pos])
                    if a > 0:
                        new_ub = room / a
                        if new_ub < ub[j] - 1e-9:
                            ub[j] = new_ub
                            changed = True
                    else:
                        new_lb = room / a
                        if new_lb > lb[j] + 1e-9:
                            lb[j] = new_lb
                            changed = True
                if sense in (GE, "=") and np.isfinite(max_act - hi_terms[pos]):
                    room = rhs - (max_act - hi_terms[pos])
                    if a > 0:
                        new_lb = room / a
                        if new_lb > lb[j] + 1e-9:
                            lb[j] = new_lb
                            changed = True
                    else:
                        new_ub = room / a
                        if new_ub < ub[j] - 1e-9:
                            ub[j] = new_ub
                            changed = True
            if changed:
                lo_terms = np.where(coefs > 0, coefs * lb[nz],
                                    coefs * ub[nz])
                hi_terms = np.where(coefs > 0, coefs * ub[nz],
                                    coefs * lb[nz])
                min_act = lo_terms.sum()
                max_act = hi_terms.sum()
        bad = lb > ub + 1e-7
        if bad.any():
            return None
        near = (lb > ub) & ~bad
        if near.any():
            mid = 0.5 * (lb[near] + ub[near])
            lb[near] = mid
            ub[near] = mid
        if not changed:
            break
    return lb, ub


def _to_standard_form(comp: _Compiled, lb: np.ndarray, ub: np.ndarray):
    """Shift/split variables to nonnegativity; bounds and senses become rows.

    Returns (A, b, c, recover, obj_shift) or None when a bound pair crosses.
    """
    n = len(comp.vars)
    cols: list[tuple[int, float, float]] = []  # (orig index, scale, shift)
    fixed = np.zeros(n)
    upper_rows: list[tuple[int, float]] = []
    col_of_var: dict[int, list[int]] = {}
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if hi - lo < -1e-12:
            return None
        if abs(hi - lo) <= 1e-12 and hi != INF:
            fixed[j] = lo
            col_of_var[j] = []
            continue
        if lo != -INF:
            col_of_var[j] = [len(cols)]
            cols.append((j, 1.0, lo))
            if hi != INF:
                upper_rows.append((j, hi - lo))
        elif hi != INF:
            col_of_var[j] = [len(cols)]
            cols.append((j, -1.0, hi))
        else:
            col_of_var[j] = [len(cols), len(cols) + 1]
            cols.append((j, 1.0, 0.0))
            cols.append((j, -1.0, 0.0))

    ncols = len(cols)
    c = np.zeros(ncols)
    for k, (j, scale, _shift) in enumerate(cols):
        c[k] = comp.c[j] * scale
    obj_shift = float(sum(comp.c[j] * sh for j, _s, sh in cols)) + \
        float(comp.c @ fixed)

    nrows = comp.A.shape[0] + len(upper_rows)
    A = np.zeros((nrows, ncols))
    senses: list[str] = []
    bvec = np.zeros(nrows)
    for i in range(comp.A.shape[0]):
        arow = comp.A[i]
        shift = float(arow @ fixed)
        for k, (j, scale, sh) in enumerate(cols):
            A[i, k] = arow[j] * scale
            shift += arow[j] * sh
        senses.append(comp.senses[i])
        bvec[i] = comp.b[i] - shift
    base = comp.A.shape[0]
    for r, (j, bound) in enumerate(upper_rows):
        for k in col_of_var[j]:
            A[base + r, k] = cols[k][1]
        senses.append(LE)
        bvec[base + r] = bound

    slack_cols = [(i, 1.0) if s == LE else (i, -1.0)
                  for i, s in enumerate(senses) if s != "="]
    if slack_cols:
        S = np.zeros((nrows, len(slack_cols)))
        for k, (i, sgn) in enumerate(slack_cols):
            S[i, k] = sgn
        A = np.hstack([A, S])
        c = np.concatenate([c, np.zeros(len(slack_cols))])
    neg = bvec < 0
    A[neg] *= -1.0
    bvec = np.abs(bvec)

    def recover(x_std: np.ndarray) -> np.ndarray:
        x = fixed.copy()
        for k, (j, scale, sh) in enumerate(cols):
            x[j] += scale * x_std[k] + sh
        return x

    return A, bvec, c, recover, obj_shift


def solve_lp(model: Model,
             bounds: dict[VarRef, tuple[float, float]] | None = None,
             max_iter: int = 50000, objective_index: int = 0) -> Solution:
    """Primal simplex over the continuous relaxation of the model.

    Integer domains are relaxed; use solve_milp for integrality.  Bland's
    rule engages after a long degenerate stall so cycling cannot occur.
    """
    comp = _Compiled(model, objective_index)
    return _solve_lp_compiled(comp, bounds, max_iter)


def _solve_lp_compiled(comp: _Compiled,
                       bounds: dict[VarRef, tuple[float, float]] | None,
                       max_iter: int) -> Solution:
    lb = comp.lb.copy()
    ub = comp.ub.copy()
    if bounds:
        for v, (lo, hi) in bounds.items():
            j = comp.index[v]
            lb[j] = max(lb[j], lo)
            ub[j] = min(ub[j], hi)
    tightened = _tighten_bounds(comp, lb, ub)
    if tightened is None:
        return Solution(INFEASIBLE)
    lb, ub = tightened
    std = _to_standard_form(comp, lb, ub)
    if std is None:
        return Solution(INFEASIBLE)
    A, b, c, recover, shift = std
    res = _simplex_standard(A, b, c, max_iter)
    if res.status != OPTIMAL:
        return Solution(res.status)
    x = recover(res.x)
    values = {v: float(x[j]) for j, v in enumerate(comp.vars)}
    internal = res.obj + shift + comp.obj_const
    sol = Solution(OPTIMAL, values, objective=comp.external_objective(internal))
    if res.dual_bound is not None:
        sol.bound = comp.external_objective(res.dual_bound + shift
                                            + comp.obj_const)
        sol.gap = abs(sol.objective - sol.bound)
    sol.residual = _max_residual(comp.model, values)
    return sol


# -- branch and bound ----------------------------------------------------------


def solve_milp(model: Model, rel_gap: float = 1e-6,
               node_limit: int = 20000, max_iter: int = 50000) -> Solution:
    """Best-bound branch and bound with most-fractional branching.

    Children of the last expanded node are explored first (depth-first dive);
    when a dive fathoms, the open node with the best bound is taken next.
    Branching ties break on the lowest variable registry index.
    """
    comp = _Compiled(model)
    int_vars = [v for v in comp.vars if v.domain in (INTEGER, BINARY)]

    def internal(sol: Solution) -> float:
        return comp.sense_mult * sol.objective

    root = _solve_lp_compiled(comp, None, max_iter)
    if root.status != OPTIMAL or not int_vars:
        return root

    incumbent: Solution | None = None
    incumbent_val = math.inf
    nodes_processed = 0
    seq = 0
    open_nodes: list[tuple[float, int, dict]] = [(internal(root), 0, {})]
    dive: list[tuple[float, int, dict]] = []

    def frac_var(sol: Solution) -> VarRef | None:
        best, best_frac = None, -1.0
        for v in int_vars:
            val = sol.values[v]
            if abs(val - round(val)) <= _INT_TOL:
                continue
            dist = 0.5 - abs(val - math.floor(val) - 0.5)
            if dist > best_frac + 1e-12:
                best_frac, best = dist, v
        return best

    def current_best_bound(extra: float | None = None) -> float:
        vals = [n[0] for n in open_nodes] + [n[0] for n in dive]
        if extra is not None:
            vals.append(extra)
        if incumbent is not None:
            vals.append(incumbent_val)
        return min(vals) if vals else incumbent_val

    while open_nodes or dive:
        if dive:
            node = dive.pop()
        else:
            k = min(range(len(open_nodes)),
                    key=lambda i: (open_nodes[i][0], open_nodes[i][1]))
            node = open_nodes.pop(k)
        bound, _, nb = node
        if incumbent is not None:
            gap = (incumbent_val - current_best_bound(bound)) \
                / max(1.0, abs(incumbent_val))
            if gap <= rel_gap:
                open_nodes.append(node)
                break
            if bound >= incumbent_val - 1e-12:
                continue
        if nodes_processed >= node_limit:
            best_bound = current_best_bound(bound)
            out = incumbent if incumbent is not None \
                else Solution(ITERATION_LIMIT)
            out.status = ITERATION_LIMIT
            out.bound = comp.external_objective(best_bound)
            if incumbent is not None:
                out.gap = (incumbent_val - best_bound) \
                    / max(1.0, abs(incumbent_val))
            out.nodes = nodes_processed
            return out
        nodes_processed += 1
        lp = _solve_lp_compiled(comp, nb, max_iter)
        if lp.status != OPTIMAL:
            continue
        node_val = internal(lp)
        if incumbent is not None and node_val >= incumbent_val - 1e-12:
            continue
        v = frac_var(lp)
        if v is None:
            vals = {r: (float(round(x)) if r.domain in (INTEGER, BINARY)
                        else x) for r, x in lp.values.items()}
            cand = Solution(OPTIMAL, vals,
                            objective=comp.external_objective(node_val))
            if node_val < incumbent_val - 1e-12:
                incumbent, incumbent_val = cand, node_val
            continue
        x = lp.values[v]
        lo0, hi0 = nb.get(v, (v.lb, v.ub))
        down, up = dict(nb), dict(nb)
        down[v] = (lo0, math.floor(x))
        up[v] = (math.ceil(x), hi0)
        seq += 2
        dive.append((node_val, seq - 1, up))
        dive.append((node_val, seq, down))

    if incumbent is None:
        return Solution(INFEASIBLE, nodes=nodes_processed)
    best_bound = current_best_bound()
    incumbent.nodes = nodes_processed
    incumbent.bound = comp.external_objective(best_bound)
    incumbent.gap = (incumbent_val - best_bound) / max(1.0, abs(incumbent_val))
    incumbent.residual = _max_residual(model, incumbent.values)
    return incumbent


# -- brute force oracle --------------------------------------------------------


def brute_force_oracle(model: Model, max_points: int = 10_000_000) -> Solution:
    """Exhaustive enumeration over the integer lattice of the model.

    Ground truth for tiny models: every variable must be integer or binary
    with finite bounds, and the box must stay within max_points lattice
    points.  Continuous variables are rejected.
    """
    varlist = model.variables()
    for v in varlist:
        if v.domain == CONTINUOUS:
            raise SolverError(
                f"oracle requires pure-integer models; {v.name} is continuous")
        if v.lb == -INF or v.ub == INF:
            raise SolverError(f"oracle requires finite bounds on {v.name}")
    ranges = [range(int(math.ceil(v.lb - 1e-9)), int(math.floor(v.ub + 1e-9)) + 1)
              for v in varlist]
    size = 1
    for r in ranges:
        size *= max(len(r), 1)
        if size > max_points:
            raise SolverError(
                f"search space exceeds {max_points} points; oracle refuses")
    if len(model.objectives) > 1:
        raise SolverError("oracle requires a scalarized model")
    obj = model.objectives[0] if model.objectives else None
    sense_mult = 1.0 if obj is None or obj.sense == "min" else -1.0

    best_val = math.inf
    best_point = None
    for point in itertools.product(*ranges):
        values = dict(zip(varlist, (float(p) for p in point)))
        if any(con.residual(values) > 1e-9 for con in model.constraints):
            continue
        val = sense_mult * obj.expr.value(values) if obj is not None else 0.0
        if val < best_val - 1e-15:
            best_val, best_point = val, values
    if best_point is None:
        return Solution(INFEASIBLE)
    objective = sense_mult * best_val if obj is not None else 0.0
    sol = Solution(OPTIMAL, best_point, objective=objective, bound=objective,
                   gap=0.0)
    sol.residual = _max_residual(model, best_point)
    return sol


# -- auditing ------------------------------------------------------------------


@dataclass
class AuditReport:
    rows: list[tuple[str, float]]
    max_residual: float
    integrality_residual: float
    by_group: dict[str, float]
    conservation: dict[str, float] = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("tag,residual\n")
            for tag, res in self.rows:
                fh.write(f"{tag},{format_number(round(res, 12))}\n")
            fh.write(f"_max,{format_number(round(self.max_residual, 12))}\n")
            for key, val in self.conservation.items():
                fh.write(f"_conservation.{key},"
                         f"{format_number(round(val, 9))}\n")


def _family_total(model: Model, solution: Solution, family: str,
                  where=None) -> float:
    return sum(solution.values.get(v, 0.0) for v in model.family(family)
               if where is None or where(v))


def audit(model: Model, solution: Solution, inst=None) -> AuditReport:
    """Per-constraint residuals plus flow-conservation bookkeeping.

    When an instance is supplied and supply-chain variable families are
    present, the report adds the no-creation balance: vaccinations plus waste
    plus terminal inventory measured against total inflow.
    """
    rows = []
    by_group: dict[str, float] = {}
    max_res = 0.0
    for con in model.constraints:
        res = con.residual(solution.values)
        rows.append((con.tag, res))
        group = con.tag.split("[", 1)[0]
        by_group[group] = max(by_group.get(group, 0.0), res)
        max_res = max(max_res, res)
    int_res = 0.0
    for v in model.variables():
        if v.domain in (INTEGER, BINARY) and v in solution.values:
            int_res = max(int_res,
                          abs(solution.values[v] - round(solution.values[v])))
    conservation: dict[str, float] = {}
    fams = model.families()
    if inst is not None and ({"x_md", "x_md_order"} & fams):
        horizon = inst.time_grid.horizon
        inflow = _family_total(model, solution, "x_md")
        inflow += _family_total(model, solution, "x_md_order")
        inflow += sum(inst.initial_inventory_dc.values())
        inflow += sum(inst.initial_inventory_vc.values())
        if "x_v_g" in fams:
            vacc = _family_total(model, solution, "x_v_g")
        elif "x_v" in fams:
            vacc = _family_total(model, solution, "x_v")
        else:
            vacc = _family_total(model, solution, "y_v")
        waste = sum(_family_total(model, solution, f)
                    for f in ("w_dc", "w_vc", "init_waste"))
        terminal = _family_total(model, solution, "inv_dc",
                                 lambda v: v.indices[-1] == horizon)
        terminal += _family_total(model, solution, "inv_vc",
                                  lambda v: v.indices[-1] == horizon)
        conservation["inflow"] = inflow
        conservation["vaccinations"] = vacc
        conservation["waste"] = waste
        conservation["terminal_inventory"] = terminal
        conservation["creation_excess"] = max(0.0,
                                              vacc + waste + terminal - inflow)
    return AuditReport(rows, max_res, int_res, by_group, conservation)
