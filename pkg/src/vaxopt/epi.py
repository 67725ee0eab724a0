"""Extended SEIR dynamics with vaccination, and their optimization coupling.

The compartment graph per region: susceptible (per risk group) flows to a
vaccinated-susceptible class and, via infection pressure from all infectious
people, to exposed; exposed progresses to infectious; detected infectious
splits into undetected, hospitalized and quarantined branches that resolve to
death; the vaccinated track runs susceptible' -> exposed' -> infectious' ->
immune.  Population is conserved per region exactly when the three branch
rates sum to the detection rate.

The optimizer embedding freezes the infectious-pressure trajectory from the
last simulation, which makes the one-step dynamics linear in the plan, then
alternates optimize / re-simulate until the plan stabilizes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance
from .model import EQ, GE, LE, LinExpr, Model, quicksum
from .scm import BuilderError, _idx
from . import solve as solver

COMPARTMENTS = ("S", "E", "I", "U", "H", "Q", "D", "Sbar")
VACCINATED_TRACK = ("Sv", "Ev", "Iv", "M")

# shipped herd-immunity curve: concave, nondecreasing on [0, 1]
DEFAULT_HERD_CURVE = ((0.0, 0.0), (0.2, 0.30), (0.4, 0.50), (0.6, 0.62),
                      (0.8, 0.70), (1.0, 0.74))


@dataclass
class EpiParams:
    beta: float                     # vaccine effectiveness in [0, 1]
    alpha: float                    # nominal infection rate
    gamma: list[float]              # response modulation per period
    progression_rate: float         # exposed -> infectious
    detection_rate: float           # infectious -> branches (and Iv -> M)
    death_rate: float               # branch compartments -> dead
    undetected_rate: dict           # group -> per-period list
    hospitalized_rate: dict
    quarantined_rate: dict
    regions: list[str] = field(default_factory=list)
    groups: list[str] = field(default_factory=list)

    def branch(self, table: dict, g: str, t: int) -> float:
        row = table.get(g)
        if row is None:
            return 0.0
        return row[min(t, len(row) - 1)]

    def validate(self, horizon: int) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("vaccine effectiveness must lie in [0,1]")
        if self.alpha < 0 or self.progression_rate < 0 \
                or self.detection_rate < 0 or self.death_rate < 0:
            raise ValueError("rates must be nonnegative")
        if len(self.gamma) < horizon:
            raise ValueError("response table shorter than horizon")


@dataclass
class EpiState:
    """Trajectories sampled at every integration step (period multiples of
    the step land exactly on integer times)."""

    regions: list[str]
    groups: list[str]
    dt: float
    times: np.ndarray
    S: np.ndarray          # (R, G, N+1)
    E: np.ndarray
    I: np.ndarray
    U: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    D: np.ndarray
    Sbar: np.ndarray
    Sv: np.ndarray         # (R, N+1)
    Ev: np.ndarray
    Iv: np.ndarray
    M: np.ndarray
    clip_correction: float = 0.0

    def population(self, step: int) -> np.ndarray:
        """Per-region population total at a step (excludes the eligibility
        bookkeeping track)."""
        per_group = (self.S + self.E + self.I + self.U + self.H + self.Q
                     + self.D)[:, :, step].sum(axis=1)
        vacc = (self.Sv + self.Ev + self.Iv + self.M)[:, step]
        return per_group + vacc

    def period_index(self, t: int) -> int:
        return int(round(t / self.dt))

    def at_period(self, name: str, t: int) -> np.ndarray:
        return getattr(self, name)[..., self.period_index(t)]

    def total_deaths(self) -> float:
        return float(self.D[:, :, -1].sum())

    def total_infectious(self, step: int) -> np.ndarray:
        return self.I[:, :, step].sum(axis=1) + self.Iv[:, step]


def params_from_instance(inst: Instance) -> EpiParams:
    if inst.epi is None:
        raise BuilderError("instance carries no epidemic block")
    blk = inst.epi
    horizon = inst.horizon
    gamma = blk.get("gamma", 1.0)
    if isinstance(gamma, (int, float)):
        gamma = [float(gamma)] * horizon
    groups = list(inst.network.groups) or ["all"]

    def table(name: str) -> dict:
        raw = blk.get(name, 0.0)
        if isinstance(raw, (int, float)):
            return {g: [float(raw)] * horizon for g in groups}
        out = {}
        for g, row in raw.items():
            if isinstance(row, (int, float)):
                out[g] = [float(row)] * horizon
            else:
                out[g] = [float(x) for x in row]
        return out

    return EpiParams(
        beta=float(blk.get("beta", 1.0)),
        alpha=float(blk.get("alpha", 0.0)),
        gamma=[float(x) for x in gamma],
        progression_rate=float(blk.get("progression_rate", 0.0)),
        detection_rate=float(blk.get("detection_rate", 0.0)),
        death_rate=float(blk.get("death_rate", 0.0)),
        undetected_rate=table("undetected_rate"),
        hospitalized_rate=table("hospitalized_rate"),
        quarantined_rate=table("quarantined_rate"),
        regions=list(inst.network.regions) or ["all"],
        groups=groups)


def initial_state_from_instance(inst: Instance) -> dict:
    """Initial compartment record map {(region, group, compartment): value};
    vaccinated-track entries use group '*'. """
    out: dict = {}
    for rec in (inst.epi or {}).get("initial", []):
        g = str(rec.get("group", "*"))
        out[(str(rec["region"]), g, str(rec["compartment"]))] = \
            float(rec["value"])
    return out


def simulate_delphi_v(params: EpiParams, initial: dict, plan,
                      horizon: int, dt: float = 1.0,
                      clip: bool = True) -> EpiState:
    """Forward-Euler integration of the compartment dynamics.

    plan maps (region, group, period) to vaccinations administered in that
    period (a rate per period; scaled by dt per step).  Negative excursions
    are clipped to zero with a warning unless clip is disabled; the total
    clipped mass is reported on the returned state.
    """
    if dt <= 0:
        raise ValueError("integration step must be positive")
    params.validate(horizon)
    regions, groups = params.regions, params.groups
    R, G = len(regions), len(groups)
    steps = int(round(horizon / dt))

    def init(r: str, g: str, comp: str) -> float:
        return float(initial.get((r, g, comp), 0.0))

    shape3 = (R, G, steps + 1)
    S = np.zeros(shape3)
    E = np.zeros(shape3)
    Icmp = np.zeros(shape3)
    U = np.zeros(shape3)
    Hcmp = np.zeros(shape3)
    Qcmp = np.zeros(shape3)
    D = np.zeros(shape3)
    Sbar = np.zeros(shape3)
    Sv = np.zeros((R, steps + 1))
    Ev = np.zeros((R, steps + 1))
    Iv = np.zeros((R, steps + 1))
    M = np.zeros((R, steps + 1))
    for ri, r in enumerate(regions):
        for gi, g in enumerate(groups):
            S[ri, gi, 0] = init(r, g, "S")
            E[ri, gi, 0] = init(r, g, "E")
            Icmp[ri, gi, 0] = init(r, g, "I")
            U[ri, gi, 0] = init(r, g, "U")
            Hcmp[ri, gi, 0] = init(r, g, "H")
            Qcmp[ri, gi, 0] = init(r, g, "Q")
            D[ri, gi, 0] = init(r, g, "D")
            Sbar[ri, gi, 0] = initial.get((r, g, "Sbar"), S[ri, gi, 0])
        Sv[ri, 0] = init(r, "*", "Sv")
        Ev[ri, 0] = init(r, "*", "Ev")
        Iv[ri, 0] = init(r, "*", "Iv")
        M[ri, 0] = init(r, "*", "M")

    def plan_rate(r: str, g: str, period: int) -> float:
        if plan is None:
            return 0.0
        return float(plan.get((r, g, period + 1), 0.0))

    clipped = 0.0
    warned = False
    beta = params.beta
    for n in range(steps):
        t_cont = n * dt
        period = min(int(t_cont), horizon - 1)
        gam = params.gamma[period]
        for ri, r in enumerate(regions):
            i_tot = Icmp[ri, :, n].sum() + Iv[ri, n]
            force = params.alpha * gam * i_tot
            v_sum = 0.0
            for gi, g in enumerate(groups):
                v = plan_rate(r, g, period)
                v_sum += v
                s_eff = S[ri, gi, n] - beta * v
                dS = -beta * v - force * s_eff
                dE = force * s_eff - params.progression_rate * E[ri, gi, n]
                dI = params.progression_rate * E[ri, gi, n] \
                    - params.detection_rate * Icmp[ri, gi, n]
                r_u = params.branch(params.undetected_rate, g, period)
                r_h = params.branch(params.hospitalized_rate, g, period)
                r_q = params.branch(params.quarantined_rate, g, period)
                dU = r_u * Icmp[ri, gi, n] - params.death_rate * U[ri, gi, n]
                dH = r_h * Icmp[ri, gi, n] - params.death_rate * Hcmp[ri, gi, n]
                dQ = r_q * Icmp[ri, gi, n] - params.death_rate * Qcmp[ri, gi, n]
                dD = params.death_rate * (U[ri, gi, n] + Hcmp[ri, gi, n]
                                          + Qcmp[ri, gi, n])
                S[ri, gi, n + 1] = S[ri, gi, n] + dt * dS
                E[ri, gi, n + 1] = E[ri, gi, n] + dt * dE
                Icmp[ri, gi, n + 1] = Icmp[ri, gi, n] + dt * dI
                U[ri, gi, n + 1] = U[ri, gi, n] + dt * dU
                Hcmp[ri, gi, n + 1] = Hcmp[ri, gi, n] + dt * dH
                Qcmp[ri, gi, n + 1] = Qcmp[ri, gi, n] + dt * dQ
                D[ri, gi, n + 1] = D[ri, gi, n] + dt * dD
                Sbar[ri, gi, n + 1] = Sbar[ri, gi, n] + dt * (-beta * v) \
                    + (S[ri, gi, n + 1] - S[ri, gi, n])
            sv_eff = Sv[ri, n] + beta * v_sum
            dSv = beta * v_sum - force * sv_eff
            dEv = force * sv_eff - params.progression_rate * Ev[ri, n]
            dIv = params.progression_rate * Ev[ri, n] \
                - params.detection_rate * Iv[ri, n]
            dM = params.detection_rate * Iv[ri, n]
            Sv[ri, n + 1] = Sv[ri, n] + dt * dSv
            Ev[ri, n + 1] = Ev[ri, n] + dt * dEv
            Iv[ri, n + 1] = Iv[ri, n] + dt * dIv
            M[ri, n + 1] = M[ri, n] + dt * dM
        if clip:
            for arr in (S, E, Icmp, U, Hcmp, Qcmp, D, Sbar):
                neg = arr[:, :, n + 1] < 0
                if neg.any():
                    clipped += float(-arr[:, :, n + 1][neg].sum())
                    arr[:, :, n + 1][neg] = 0.0
            for arr in (Sv, Ev, Iv, M):
                neg = arr[:, n + 1] < 0
                if neg.any():
                    clipped += float(-arr[:, n + 1][neg].sum())
                    arr[:, n + 1][neg] = 0.0
            if clipped > 0 and not warned:
                warnings.warn(f"negative compartment clipped (total "
                              f"{clipped:.3g} so far)")
                warned = True

    times = np.arange(steps + 1) * dt
    return EpiState(regions=regions, groups=groups, dt=dt, times=times,
                    S=S, E=E, I=Icmp, U=U, H=Hcmp, Q=Qcmp, D=D, Sbar=Sbar,
                    Sv=Sv, Ev=Ev, Iv=Iv, M=M, clip_correction=clipped)


def trajectory_csv(state: EpiState, path: str, per_period: bool = True) -> None:
    """region, group, period, compartment, value rows (vaccinated-track rows
    carry group '*')."""
    idxs = range(len(state.times))
    if per_period:
        stride = int(round(1.0 / state.dt))
        idxs = range(0, len(state.times), max(stride, 1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("region,group,period,compartment,value\n")
        for ri, r in enumerate(state.regions):
            for gi, g in enumerate(state.groups):
                for name in ("S", "E", "I", "U", "H", "Q", "D", "Sbar"):
                    arr = getattr(state, name)
                    for n in idxs:
                        fh.write(f"{r},{g},{state.times[n]:g},{name},"
                                 f"{arr[ri, gi, n]:.9g}\n")
            for name in VACCINATED_TRACK:
                arr = getattr(state, name)
                for n in idxs:
                    fh.write(f"{r},*,{state.times[n]:g},{name},"
                             f"{arr[ri, n]:.9g}\n")


# -- optimization embedding --------------------------------------------------------


def _linear_epi_model(inst: Instance, params: EpiParams, initial: dict,
                      i_tot_frozen: np.ndarray, supply: dict,
                      weights: dict) -> tuple[Model, dict]:
    """One-period-step linear dynamics with frozen infectious pressure."""
    T = inst.horizon
    regions, groups = params.regions, params.groups
    m = Model("epi_embedding")
    V = {}

    def add_traj(fam: str, idx: tuple) -> list:
        return [m.add_var(fam, idx + (t,)) for t in range(T + 1)]

    beta = params.beta
    death_w = weights.get("deaths", 1.0)
    infect_w = weights.get("infections", 0.0)
    vax_c = weights.get("vaccination_cost", 0.0)
    objective = LinExpr()
    for ri, r in enumerate(regions):
        sv = add_traj("epi_Sv", (r,))
        ev = add_traj("epi_Ev", (r,))
        iv = add_traj("epi_Iv", (r,))
        mm = add_traj("epi_M", (r,))
        per_group = {}
        for g in groups:
            names = {}
            for fam in ("epi_S", "epi_E", "epi_I", "epi_U", "epi_H",
                        "epi_Q", "epi_D", "epi_Sbar"):
                names[fam] = add_traj(fam, (r, g))
            names["epi_V"] = [m.add_var("epi_V", (r, g, t))
                              for t in range(T)]
            for t in range(T):
                V[(r, g, t + 1)] = names["epi_V"][t]
            per_group[g] = names

        def pin(var, value):
            m.add_constr(LinExpr.term(var), EQ, value,
                         f"epi.init[{var.family},{_idx(*var.indices)}]")

        for g in groups:
            tr = per_group[g]
            pin(tr["epi_S"][0], float(initial.get((r, g, "S"), 0.0)))
            pin(tr["epi_E"][0], float(initial.get((r, g, "E"), 0.0)))
            pin(tr["epi_I"][0], float(initial.get((r, g, "I"), 0.0)))
            pin(tr["epi_U"][0], float(initial.get((r, g, "U"), 0.0)))
            pin(tr["epi_H"][0], float(initial.get((r, g, "H"), 0.0)))
            pin(tr["epi_Q"][0], float(initial.get((r, g, "Q"), 0.0)))
            pin(tr["epi_D"][0], float(initial.get((r, g, "D"), 0.0)))
            pin(tr["epi_Sbar"][0],
                float(initial.get((r, g, "Sbar"),
                                  initial.get((r, g, "S"), 0.0))))
        pin(sv[0], float(initial.get((r, "*", "Sv"), 0.0)))
        pin(ev[0], float(initial.get((r, "*", "Ev"), 0.0)))
        pin(iv[0], float(initial.get((r, "*", "Iv"), 0.0)))
        pin(mm[0], float(initial.get((r, "*", "M"), 0.0)))

        for t in range(T):
            force = params.alpha * params.gamma[t] * float(i_tot_frozen[ri, t])
            v_all = quicksum(per_group[g]["epi_V"][t] for g in groups)
            for g in groups:
                tr = per_group[g]
                v = LinExpr.term(tr["epi_V"][t])
                s_eff = LinExpr.term(tr["epi_S"][t]) - beta * v
                m.add_constr(
                    LinExpr.term(tr["epi_S"][t + 1])
                    - LinExpr.term(tr["epi_S"][t]) + beta * v + force * s_eff,
                    EQ, 0.0, f"epi.dyn.S[{_idx(r, g, t)}]")
                m.add_constr(
                    LinExpr.term(tr["epi_E"][t + 1])
                    - (1.0 - params.progression_rate)
                    * LinExpr.term(tr["epi_E"][t]) - force * s_eff,
                    EQ, 0.0, f"epi.dyn.E[{_idx(r, g, t)}]")
                m.add_constr(
                    LinExpr.term(tr["epi_I"][t + 1])
                    - (1.0 - params.detection_rate)
                    * LinExpr.term(tr["epi_I"][t])
                    - params.progression_rate * LinExpr.term(tr["epi_E"][t]),
                    EQ, 0.0, f"epi.dyn.I[{_idx(r, g, t)}]")
                for fam, rate_table in (("epi_U", params.undetected_rate),
                                        ("epi_H", params.hospitalized_rate),
                                        ("epi_Q", params.quarantined_rate)):
                    rate = params.branch(rate_table, g, t)
                    m.add_constr(
                        LinExpr.term(tr[fam][t + 1])
                        - (1.0 - params.death_rate) * LinExpr.term(tr[fam][t])
                        - rate * LinExpr.term(tr["epi_I"][t]),
                        EQ, 0.0, f"epi.dyn.{fam[4:]}[{_idx(r, g, t)}]")
                m.add_constr(
                    LinExpr.term(tr["epi_D"][t + 1])
                    - LinExpr.term(tr["epi_D"][t])
                    - params.death_rate * (LinExpr.term(tr["epi_U"][t])
                                           + LinExpr.term(tr["epi_H"][t])
                                           + LinExpr.term(tr["epi_Q"][t])),
                    EQ, 0.0, f"epi.dyn.D[{_idx(r, g, t)}]")
                # eligibility shrinks by effective vaccinations and S outflow
                m.add_constr(
                    LinExpr.term(tr["epi_Sbar"][t + 1])
                    - LinExpr.term(tr["epi_Sbar"][t]) + beta * v
                    + LinExpr.term(tr["epi_S"][t])
                    - LinExpr.term(tr["epi_S"][t + 1]),
                    LE, 0.0, f"epi.eligible.update[{_idx(r, g, t)}]")
                m.add_constr(v - LinExpr.term(tr["epi_Sbar"][t]), LE, 0.0,
                             f"epi.eligible.cap[{_idx(r, g, t)}]")
            sv_eff = LinExpr.term(sv[t]) + beta * v_all
            m.add_constr(
                LinExpr.term(sv[t + 1]) - LinExpr.term(sv[t]) - beta * v_all
                + force * sv_eff, EQ, 0.0, f"epi.dyn.Sv[{_idx(r, t)}]")
            m.add_constr(
                LinExpr.term(ev[t + 1]) - (1.0 - params.progression_rate)
                * LinExpr.term(ev[t]) - force * sv_eff,
                EQ, 0.0, f"epi.dyn.Ev[{_idx(r, t)}]")
            m.add_constr(
                LinExpr.term(iv[t + 1]) - (1.0 - params.detection_rate)
                * LinExpr.term(iv[t])
                - params.progression_rate * LinExpr.term(ev[t]),
                EQ, 0.0, f"epi.dyn.Iv[{_idx(r, t)}]")
            m.add_constr(
                LinExpr.term(mm[t + 1]) - LinExpr.term(mm[t])
                - params.detection_rate * LinExpr.term(iv[t]),
                EQ, 0.0, f"epi.dyn.M[{_idx(r, t)}]")
        for g in groups:
            tr = per_group[g]
            objective = objective + death_w * LinExpr.term(tr["epi_D"][T])
            if infect_w:
                objective = objective + infect_w * quicksum(
                    tr["epi_I"][t] for t in range(T + 1))
            if vax_c:
                objective = objective + vax_c * quicksum(
                    tr["epi_V"][t] for t in range(T))
    for t in range(T):
        cap = supply.get(t + 1)
        if cap is not None:
            m.add_constr(
                quicksum(V[(r, g, t + 1)] for r in regions for g in groups),
                LE, float(cap), f"epi.supply[{t + 1}]")
    m.add_objective("min", objective, "epi_burden")
    return m, V


def build_epi_embedding(inst: Instance, params: EpiParams | None = None,
                        supply: dict | None = None,
                        weights: dict | None = None,
                        tol: float = 1e-4, max_iter: int = 50,
                        dt: float = 1.0) -> dict:
    """Iterative coordinate descent between the plan optimizer and simulator.

    Freezes the infectious-pressure trajectory, solves the resulting linear
    program for the vaccination plan, re-simulates with that plan, and
    repeats until the plan's L1 change falls below tol (or the iteration cap
    hits, in which case the best iterate is returned flagged).
    """
    params = params or params_from_instance(inst)
    params.validate(inst.horizon)
    initial = initial_state_from_instance(inst)
    if supply is None:
        supply = {int(rec["t"]): float(rec["value"])
                  for rec in (inst.epi or {}).get("vaccine_budget", [])}
    if weights is None:
        blk = inst.epi or {}
        weights = {"deaths": float(blk.get("death_weight", 1.0)),
                   "infections": float(blk.get("infection_weight", 0.0)),
                   "vaccination_cost": float(blk.get("vaccination_cost", 0.0))}
    T = inst.horizon
    regions, groups = params.regions, params.groups
    plan: dict = {}
    state = simulate_delphi_v(params, initial, plan, T, dt=dt)
    best = None
    history = []
    for iteration in range(1, max_iter + 1):
        stride = int(round(1.0 / state.dt))
        i_tot = np.zeros((len(regions), T))
        for t in range(T):
            i_tot[:, t] = state.total_infectious(t * stride)
        model, vmap = _linear_epi_model(inst, params, initial, i_tot,
                                        supply, weights)
        sol = solver.solve_lp(model)
        if sol.status != solver.OPTIMAL:
            raise BuilderError(f"embedding LP ended with {sol.status}")
        new_plan = {key: sol.values[v] for key, v in vmap.items()
                    if sol.values[v] > 1e-12}
        opt_deaths = sum(sol.values[v] for v in model.family("epi_D")
                         if v.indices[-1] == T)
        state = simulate_delphi_v(params, initial, new_plan, T, dt=dt)
        sim_deaths = state.total_deaths()
        keys = set(plan) | set(new_plan)
        delta = sum(abs(plan.get(k, 0.0) - new_plan.get(k, 0.0))
                    for k in keys)
        history.append({"iteration": iteration, "plan_change": delta,
                        "optimizer_deaths": opt_deaths,
                        "simulated_deaths": sim_deaths})
        result = {"plan": new_plan, "trajectory": state,
                  "optimizer_objective": sol.objective,
                  "optimizer_deaths": opt_deaths,
                  "simulated_deaths": sim_deaths,
                  "iterations": iteration, "converged": delta <= tol,
                  "history": history}
        if best is None or sim_deaths < best["simulated_deaths"] - 1e-12:
            best = result
        plan = new_plan
        if delta <= tol:
            return result
    best = dict(best)
    best["converged"] = False
    return best


# -- herd immunity allocation --------------------------------------------------------


def _check_concave(points) -> list[tuple[float, float]]:
    pts = sorted((float(x), float(y)) for x, y in points)
    if len(pts) < 1:
        raise ValueError("herd curve needs at least one point")
    slopes = []
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x1 <= x0:
            raise ValueError("herd curve abscissae must increase")
        slopes.append((y1 - y0) / (x1 - x0))
    for s0, s1 in zip(slopes, slopes[1:]):
        if s1 > s0 + 1e-12:
            raise ValueError("herd curve must be concave")
    if any(s < -1e-12 for s in slopes):
        raise ValueError("herd curve must be nondecreasing")
    return pts


def herd_immunity_allocate(herd_points, availability: float,
                           susceptible: dict, populations: dict) -> dict:
    """Split vaccine availability across regions to maximize vaccinated
    people plus herd-immunity-protected people.

    The concave herd curve enters through its chord hypograph, which is
    exact under maximization.  Returns fractions per region plus the split
    objective value.
    """
    pts = _check_concave(herd_points)
    regions = sorted(populations)
    m = Model("herd_allocation")
    objective = LinExpr()
    fvars = {}
    for r in regions:
        pop = float(populations[r])
        s_r = float(susceptible.get(r, pop))
        if not 0.0 <= s_r <= pop + 1e-9:
            raise ValueError(f"susceptible count outside [0, population] "
                             f"for region {r}")
        frac_cap = s_r / pop if pop > 0 else 0.0
        f = m.add_var("herd_frac", (r,), ub=min(frac_cap, 1.0))
        h = m.add_var("herd_gain", (r,))
        fvars[r] = f
        if len(pts) == 1:
            m.add_constr(LinExpr.term(h), LE, pts[0][1],
                         f"herd.chord[{r},0]")
        for seg, ((x0, y0), (x1, y1)) in enumerate(zip(pts, pts[1:])):
            slope = (y1 - y0) / (x1 - x0)
            m.add_constr(LinExpr.term(h) - slope * LinExpr.term(f), LE,
                         y0 - slope * x0, f"herd.chord[{r},{seg}]")
        objective = objective + pop * LinExpr.term(f) + pop * LinExpr.term(h)
    m.add_constr(quicksum(float(populations[r]) * LinExpr.term(fvars[r])
                          for r in regions), LE, float(availability),
                 "herd.availability")
    m.add_objective("max", objective, "herd_objective")
    sol = solver.solve_lp(m)
    if sol.status != solver.OPTIMAL:
        raise ValueError(f"herd allocation LP ended with {sol.status}")
    return {"fractions": {r: sol.values[fvars[r]] for r in regions},
            "value": float(sol.objective)}


def coverage_coefficient(beta: float, alpha: float) -> float:
    """Population multiplier needed for herd immunity at effectiveness beta
    and nominal infection rate alpha."""
    if beta <= 0:
        raise ValueError("vaccine effectiveness must be positive")
    if alpha <= 0:
        raise ValueError("nominal infection rate must be positive")
    return (1.0 / beta) * (1.0 - 1.0 / alpha)
