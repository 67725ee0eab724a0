"""Algebraic model intermediate representation.

Linear models are assembled from typed decision variables, sparse linear
expressions, tagged constraints, and one or more objectives.  The module also
provides the small linearization gadgets (min of two expressions, absolute
value) that the constraint builders rely on, plus a deterministic LP-format
writer and a matching reader for round trips through the built-in solver.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator, Mapping

INF = float("inf")

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"

_DOMAINS = (CONTINUOUS, INTEGER, BINARY)

LE = "<="
EQ = "="
GE = ">="

_SENSES = (LE, EQ, GE)


class ModelError(ValueError):
    """Raised on malformed model construction (duplicate vars, bad bounds...)."""


def _index_key(indices: tuple) -> tuple:
    # ints order numerically, everything else lexically; type rank keeps the
    # comparison well-defined when families mix id kinds
    return tuple((0, v) if isinstance(v, (int, float)) and not isinstance(v, bool)
                 else (1, str(v)) for v in indices)


@dataclass(frozen=True)
class VarRef:
    """Handle for a registered decision variable.

    Identity (hash/equality) is the (family, indices) pair; domain and bounds
    ride along for convenience but do not participate in comparisons.
    """

    family: str
    indices: tuple
    domain: str = field(default=CONTINUOUS, compare=False)
    lb: float = field(default=0.0, compare=False)
    ub: float = field(default=INF, compare=False)

    def sort_key(self) -> tuple:
        return (self.family, _index_key(self.indices))

    @property
    def name(self) -> str:
        if not self.indices:
            return self.family
        return f"{self.family}[{','.join(str(i) for i in self.indices)}]"

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return self.name


class LinExpr:
    """Sparse linear expression: coefficient map plus a constant term.

    Arithmetic returns new expressions; zero coefficients are dropped so the
    canonical form is unique.  Terms iterate in (family, indices) order.
    """

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs: Mapping[VarRef, float] | None = None,
                 constant: float = 0.0):
        self.coeffs: dict[VarRef, float] = {}
        if coeffs:
            for v, c in coeffs.items():
                if c != 0.0:
                    self.coeffs[v] = float(c)
        self.constant = float(constant)

    @staticmethod
    def term(var: VarRef, coef: float = 1.0) -> "LinExpr":
        return LinExpr({var: coef})

    @staticmethod
    def const(value: float) -> "LinExpr":
        return LinExpr(constant=value)

    def copy(self) -> "LinExpr":
        out = LinExpr()
        out.coeffs = dict(self.coeffs)
        out.constant = self.constant
        return out

    def terms(self) -> list[tuple[VarRef, float]]:
        return sorted(self.coeffs.items(), key=lambda t: t[0].sort_key())

    def is_constant(self) -> bool:
        return not self.coeffs

    def value(self, assignment: Mapping[VarRef, float]) -> float:
        return self.constant + sum(c * assignment.get(v, 0.0)
                                   for v, c in self.coeffs.items())

    def _add_term(self, var: VarRef, coef: float) -> None:
        c = self.coeffs.get(var, 0.0) + coef
        if c == 0.0:
            self.coeffs.pop(var, None)
        else:
            self.coeffs[var] = c

    def __add__(self, other) -> "LinExpr":
        out = self.copy()
        if isinstance(other, LinExpr):
            for v, c in other.coeffs.items():
                out._add_term(v, c)
            out.constant += other.constant
        elif isinstance(other, VarRef):
            out._add_term(other, 1.0)
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other) -> "LinExpr":
        if isinstance(other, LinExpr):
            return self + (other * -1.0)
        if isinstance(other, VarRef):
            return self + LinExpr({other: -1.0})
        return self + (-float(other))

    def __rsub__(self, other) -> "LinExpr":
        return (self * -1.0) + other

    def __mul__(self, scalar: float) -> "LinExpr":
        out = LinExpr(constant=self.constant * float(scalar))
        if scalar != 0.0:
            out.coeffs = {v: c * float(scalar) for v, c in self.coeffs.items()}
        return out

    __rmul__ = __mul__

    def __neg__(self) -> "LinExpr":
        return self * -1.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinExpr):
            return NotImplemented
        return self.constant == other.constant and self.coeffs == other.coeffs

    def __hash__(self):  # pragma: no cover - expressions are not dict keys
        return hash((self.constant, tuple(self.terms())))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        parts = [f"{c:+g}*{v.name}" for v, c in self.terms()]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


def lin(*pairs: tuple[float, VarRef], constant: float = 0.0) -> LinExpr:
    """Build an expression from (coefficient, variable) pairs."""
    out = LinExpr(constant=constant)
    for coef, var in pairs:
        out._add_term(var, float(coef))
    return out


def quicksum(items: Iterable) -> LinExpr:
    """Sum of expressions, variables and numbers into one LinExpr."""
    out = LinExpr()
    for item in items:
        if isinstance(item, LinExpr):
            for v, c in item.coeffs.items():
                out._add_term(v, c)
            out.constant += item.constant
        elif isinstance(item, VarRef):
            out._add_term(item, 1.0)
        else:
            out.constant += float(item)
    return out


@dataclass
class Constraint:
    lhs: LinExpr
    sense: str
    rhs: float
    tag: str

    def residual(self, assignment: Mapping[VarRef, float]) -> float:
        """Violation magnitude at the given point (0 when satisfied)."""
        v = self.lhs.value(assignment)
        if self.sense == LE:
            return max(0.0, v - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - v)
        return abs(v - self.rhs)


@dataclass
class Objective:
    sense: str  # "min" | "max"
    expr: LinExpr
    name: str = "obj"


class Model:
    """Mutable container of variables, constraints and objectives.

    Single-writer during construction; once built it is treated as read-only
    by the solver and exporters.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self._vars: dict[tuple[str, tuple], VarRef] = {}
        self.constraints: list[Constraint] = []
        self.objectives: list[Objective] = []
        self.metadata: dict = {}
        self._tags: set[str] = set()
        self._gadget_seq = 0

    # -- variables ---------------------------------------------------------

    def add_var(self, family: str, indices: tuple = (), domain: str = CONTINUOUS,
                lb: float = 0.0, ub: float = INF) -> VarRef:
        if domain not in _DOMAINS:
            raise ModelError(f"unknown domain {domain!r}")
        key = (family, tuple(indices))
        if key in self._vars:
            raise ModelError(f"variable {family}{tuple(indices)} already registered")
        if domain == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ModelError(f"bounds lo={lb} > hi={ub} for {family}{tuple(indices)}")
        ref = VarRef(family, tuple(indices), domain, float(lb), float(ub))
        self._vars[key] = ref
        return ref

    def ensure_var(self, family: str, indices: tuple = (),
                   domain: str = CONTINUOUS, lb: float = 0.0,
                   ub: float = INF) -> VarRef:
        """Return the registered variable, creating it on first use.

        Builders share families (flows, inventories); the first registration
        fixes domain and bounds.
        """
        key = (family, tuple(indices))
        if key in self._vars:
            return self._vars[key]
        return self.add_var(family, indices, domain, lb, ub)

    def var(self, family: str, indices: tuple = ()) -> VarRef:
        try:
            return self._vars[(family, tuple(indices))]
        except KeyError:
            raise ModelError(f"variable {family}{tuple(indices)} not registered") from None

    def has_var(self, family: str, indices: tuple = ()) -> bool:
        return (family, tuple(indices)) in self._vars

    def variables(self) -> list[VarRef]:
        """All variables in registration order (the solver's column order)."""
        return list(self._vars.values())

    def family(self, family: str) -> list[VarRef]:
        return [v for v in self._vars.values() if v.family == family]

    def families(self) -> set[str]:
        return {v.family for v in self._vars.values()}

    # -- constraints and objectives -----------------------------------------

    def add_constr(self, lhs: LinExpr | VarRef, sense: str, rhs: float,
                   tag: str) -> Constraint:
        if isinstance(lhs, VarRef):
            lhs = LinExpr.term(lhs)
        if sense not in _SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if tag in self._tags:
            raise ModelError(f"duplicate constraint tag {tag!r}")
        for v in lhs.coeffs:
            if (v.family, v.indices) not in self._vars:
                raise ModelError(f"constraint {tag!r} uses unregistered variable {v.name}")
        con = Constraint(lhs, sense, float(rhs), tag)
        self.constraints.append(con)
        self._tags.add(tag)
        return con

    def add_objective(self, sense: str, expr: LinExpr, name: str = "") -> Objective:
        if sense not in ("min", "max"):
            raise ModelError(f"objective sense must be min or max, got {sense!r}")
        for v in expr.coeffs:
            if (v.family, v.indices) not in self._vars:
                raise ModelError(f"objective uses unregistered variable {v.name}")
        obj = Objective(sense, expr.copy(), name or f"obj{len(self.objectives)}")
        self.objectives.append(obj)
        return obj

    def constraints_by_tag(self, prefix: str) -> list[Constraint]:
        return [c for c in self.constraints if c.tag.startswith(prefix)]

    def fresh(self, kind: str) -> int:
        self._gadget_seq += 1
        return self._gadget_seq

    # -- linearization gadgets ----------------------------------------------

    def linearize_min(self, out: VarRef, a: LinExpr, b: LinExpr,
                      m_a: float, m_b: float, tag: str = "") -> None:
        """Force out == min(a, b) via one fresh selector binary.

        m_a must upper-bound a - min(a,b) over the feasible region and m_b
        likewise for b; the selector picks which argument binds from below.
        """
        if m_a <= 0 or m_b <= 0:
            raise ModelError("big-M for min linearization must be positive")
        seq = self.fresh("min")
        base = tag or f"gadget.min.{seq}"
        sel = self.add_var("_min_sel", (seq,), BINARY)
        self.add_constr(LinExpr.term(out) - a, LE, 0.0, f"{base}.ub_a")
        self.add_constr(LinExpr.term(out) - b, LE, 0.0, f"{base}.ub_b")
        self.add_constr(LinExpr.term(out) - a + lin((m_a, sel)), GE, 0.0, f"{base}.lb_a")
        self.add_constr(LinExpr.term(out) - b - lin((m_b, sel)), GE, -m_b, f"{base}.lb_b")

    def linearize_abs(self, out: VarRef, e: LinExpr, tag: str = "") -> None:
        """Bound out >= |e|; exact when out is pushed down by the objective."""
        seq = self.fresh("abs")
        base = tag or f"gadget.abs.{seq}"
        self.add_constr(LinExpr.term(out) - e, GE, 0.0, f"{base}.pos")
        self.add_constr(LinExpr.term(out) + e, GE, 0.0, f"{base}.neg")


def clone(model: Model) -> Model:
    """Independent copy sharing immutable variable handles."""
    out = Model(model.name)
    out._vars = dict(model._vars)
    out.constraints = [Constraint(c.lhs.copy(), c.sense, c.rhs, c.tag)
                       for c in model.constraints]
    out.objectives = [Objective(o.sense, o.expr.copy(), o.name)
                      for o in model.objectives]
    out.metadata = dict(model.metadata)
    out._tags = set(model._tags)
    out._gadget_seq = model._gadget_seq
    return out


# -- deterministic LP text format --------------------------------------------


def format_number(x: float) -> str:
    """Up to 12 significant digits, positional notation below 1e12."""
    if x != x or x in (INF, -INF):
        raise ModelError(f"cannot format non-finite value {x}")
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    s = f"{x:.12g}"
    if ("e" in s or "E" in s) and abs(x) < 1e12:
        s = format(Decimal(s), "f")
    return s


def _lp_names(model: Model) -> dict[VarRef, str]:
    names: dict[VarRef, str] = {}
    used: dict[str, int] = {}
    for v in model.variables():
        base = re.sub(r"[^0-9a-zA-Z]", "_", v.name)
        if base and base[0].isdigit():
            base = "v_" + base
        n = used.get(base, 0)
        used[base] = n + 1
        names[v] = base if n == 0 else f"{base}__{n}"
    return names


def _lp_expr(expr: LinExpr, names: Mapping[VarRef, str]) -> str:
    parts: list[str] = []
    for v, c in expr.terms():
        sign = "-" if c < 0 else "+"
        mag = format_number(abs(c))
        frag = names[v] if mag == "1" else f"{mag} {names[v]}"
        if not parts and sign == "+":
            parts.append(frag)
        else:
            parts.append(f"{sign} {frag}")
    if expr.constant != 0.0 or not parts:
        c = expr.constant
        sign = "-" if c < 0 else "+"
        mag = format_number(abs(c))
        if not parts and sign == "+":
            parts.append(mag)
        else:
            parts.append(f"{sign} {mag}")
    return " ".join(parts)


def export_lp(model: Model, path: str) -> None:
    """Write the model as deterministic LP-format text.

    Identical models produce byte-identical files.  Only single-objective
    models are exportable; scalarize first.
    """
    if len(model.objectives) > 1:
        raise ModelError("export requires a scalarized (single-objective) model")
    text = render_lp(model)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def render_lp(model: Model) -> str:
    if len(model.objectives) > 1:
        raise ModelError("export requires a scalarized (single-objective) model")
    names = _lp_names(model)
    lines: list[str] = []
    if model.objectives:
        obj = model.objectives[0]
        lines.append("Maximize" if obj.sense == "max" else "Minimize")
        lines.append(f" obj: {_lp_expr(obj.expr, names)}")
    else:
        lines.append("Minimize")
        lines.append(" obj: 0")
    lines.append("Subject To")
    for i, con in enumerate(model.constraints):
        cname = re.sub(r"[^0-9a-zA-Z]", "_", con.tag) or f"c{i}"
        body = _lp_expr(LinExpr(con.lhs.coeffs), names)
        rhs = con.rhs - con.lhs.constant
        lines.append(f" {cname}: {body} {con.sense} {format_number(rhs)}")
    bound_lines = []
    for v in model.variables():
        if v.domain == BINARY and v.lb == 0.0 and v.ub == 1.0:
            continue
        if v.lb == 0.0 and v.ub == INF:
            continue
        if v.lb == -INF and v.ub == INF:
            bound_lines.append(f" {names[v]} free")
        elif v.ub == INF:
            bound_lines.append(f" {format_number(v.lb)} <= {names[v]}")
        elif v.lb == -INF:
            bound_lines.append(f" {names[v]} <= {format_number(v.ub)}")
        else:
            bound_lines.append(f" {format_number(v.lb)} <= {names[v]} <= {format_number(v.ub)}")
    if bound_lines:
        lines.append("Bounds")
        lines.extend(bound_lines)
    generals = [names[v] for v in model.variables() if v.domain == INTEGER]
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    binaries = [names[v] for v in model.variables() if v.domain == BINARY]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


_TERM_RE = re.compile(r"([+-]?)\s*(\d+(?:\.\d*)?|\.\d+)?\s*([A-Za-z_][A-Za-z0-9_]*)?")


def _parse_expr(model: Model, text: str,
                vars_seen: dict[str, VarRef]) -> LinExpr:
    expr = LinExpr()
    pos = 0
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ModelError(f"cannot parse LP expression near {text[pos:pos+20]!r}")
        sign, num, name = m.groups()
        coef = float(num) if num else 1.0
        if sign == "-":
            coef = -coef
        if name:
            if name not in vars_seen:
                vars_seen[name] = model.add_var(name)
            expr = expr + LinExpr({vars_seen[name]: coef})
        elif num:
            expr = expr + coef
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return expr


def parse_lp(path: str) -> Model:
    """Read LP text written by export_lp back into a Model.

    Supports the dialect this module emits (sufficient for round trips); it
    is not a general-purpose LP reader.
    """
    with open(path, encoding="utf-8") as fh:
        raw = [ln.rstrip() for ln in fh]
    model = Model(name="lp_import")
    vars_seen: dict[str, VarRef] = {}
    section = None
    sense = "min"
    n_con = 0
    for line in raw:
        stripped = line.strip()
        if not stripped:
            continue
        low = stripped.lower()
        if low in ("minimize", "maximize", "subject to", "bounds",
                   "generals", "binaries", "end"):
            section = low
            if low == "minimize":
                sense = "min"
            elif low == "maximize":
                sense = "max"
            continue
        if section in ("minimize", "maximize"):
            body = stripped.split(":", 1)[1] if ":" in stripped else stripped
            model.add_objective(sense, _parse_expr(model, body.strip(), vars_seen))
        elif section == "subject to":
            label, body = (stripped.split(":", 1) + [""])[:2] if ":" in stripped \
                else (f"c{n_con}", stripped)
            m = re.search(r"(<=|>=|=)", body)
            if not m:
                raise ModelError(f"constraint without sense: {stripped!r}")
            lhs = _parse_expr(model, body[:m.start()].strip(), vars_seen)
            rhs = float(body[m.end():].strip())
            model.add_constr(lhs, m.group(1), rhs, label.strip())
            n_con += 1
        elif section == "bounds":
            if stripped.endswith(" free"):
                name = stripped[:-5].strip()
                v = vars_seen[name]
                vars_seen[name] = _rebound(model, v, -INF, INF)
                continue
            parts = re.split(r"<=", stripped)
            if len(parts) == 3:
                lo, name, hi = float(parts[0]), parts[1].strip(), float(parts[2])
            elif len(parts) == 2:
                a, b = parts[0].strip(), parts[1].strip()
                if re.fullmatch(r"[-+.\d][-+.\deE]*", a):
                    lo, name, hi = float(a), b, INF
                else:
                    lo, name, hi = 0.0, a, float(b)
            else:
                raise ModelError(f"cannot parse bound line {stripped!r}")
            v = vars_seen[name]
            vars_seen[name] = _rebound(model, v, lo, hi)
        elif section == "generals":
            v = vars_seen[stripped]
            vars_seen[stripped] = _redomain(model, v, INTEGER)
        elif section == "binaries":
            v = vars_seen[stripped]
            vars_seen[stripped] = _redomain(model, v, BINARY)
    return model


def _rebound(model: Model, v: VarRef, lb: float, ub: float) -> VarRef:
    new = VarRef(v.family, v.indices, v.domain, lb, ub)
    model._vars[(v.family, v.indices)] = new
    return new


def _redomain(model: Model, v: VarRef, domain: str) -> VarRef:
    lb, ub = (max(v.lb, 0.0), min(v.ub, 1.0)) if domain == BINARY else (v.lb, v.ub)
    new = VarRef(v.family, v.indices, domain, lb, ub)
    model._vars[(v.family, v.indices)] = new
    return new
