import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaxopt.model import (BINARY, INF, LinExpr, Model, ModelError, VarRef,
                          export_lp, format_number, lin, parse_lp, quicksum,
                          render_lp)
from vaxopt import solve


def test_add_var_basics():
    m = Model()
    v = m.add_var("open_vc", ("k1",), BINARY)
    assert v.domain == BINARY and (v.lb, v.ub) == (0.0, 1.0)
    assert m.var("open_vc", ("k1",)) is v
    with pytest.raises(ModelError):
        m.add_var("open_vc", ("k1",), BINARY)
    with pytest.raises(ModelError):
        m.add_var("bad", (), lb=3.0, ub=1.0)


def test_constraint_rejects_unregistered_vars():
    m = Model()
    ghost = VarRef("ghost", ())
    with pytest.raises(ModelError):
        m.add_constr(LinExpr.term(ghost), "<=", 1.0, "c")


def test_tags_unique_and_queryable():
    m = Model()
    x = m.add_var("x")
    m.add_constr(LinExpr.term(x), "<=", 1.0, "grp.rule[1]")
    m.add_constr(LinExpr.term(x), "<=", 2.0, "grp.rule[2]")
    with pytest.raises(ModelError):
        m.add_constr(LinExpr.term(x), "<=", 3.0, "grp.rule[1]")
    assert len(m.constraints_by_tag("grp.rule")) == 2


coef = st.integers(min_value=-4, max_value=4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coef, st.integers(0, 3)), max_size=6),
       st.lists(st.tuples(coef, st.integers(0, 3)), max_size=6),
       st.lists(st.tuples(coef, st.integers(0, 3)), max_size=6))
def test_linexpr_addition_commutes_and_associates(ta, tb, tc):
    m = Model()
    vs = [m.add_var(f"x{i}") for i in range(4)]

    def build(terms):
        return quicksum(LinExpr({vs[i]: c}) for c, i in terms)

    a, b, c = build(ta), build(tb), build(tc)
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)


def test_linexpr_canonical_drops_zeros():
    m = Model()
    x = m.add_var("x")
    e = LinExpr({x: 1.0}) - LinExpr({x: 1.0})
    assert not e.coeffs


def test_linearize_min_constants():
    # min(3, 5): with out maximized, only out = 3 is feasible
    m = Model()
    out = m.add_var("out", lb=-INF)
    m.linearize_min(out, LinExpr.const(3.0), LinExpr.const(5.0), 10.0, 10.0)
    m.add_objective("max", LinExpr.term(out))
    sol = solve.solve_milp(m)
    assert sol.status == solve.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)


def test_linearize_min_symmetric_arguments():
    m = Model()
    out = m.add_var("out", lb=-INF)
    a = LinExpr.const(4.0)
    m.linearize_min(out, a, a, 10.0, 10.0)
    m.add_objective("max", LinExpr.term(out))
    sol = solve.solve_milp(m)
    assert sol.objective == pytest.approx(4.0, abs=1e-9)


def test_linearize_min_rejects_bad_big_m():
    m = Model()
    out = m.add_var("out")
    with pytest.raises(ModelError):
        m.linearize_min(out, LinExpr.const(1), LinExpr.const(2), 0.0, 5.0)


def test_linearize_min_matches_plain_min_over_grid():
    # enumerate every lattice assignment of the arguments; maximizing out
    # must reproduce min(a, b) exactly (independent oracle: python's min)
    for xv, yv in itertools.product(range(4), range(4)):
        m = Model()
        x = m.add_var("x", ub=3)
        y = m.add_var("y", ub=3)
        m.add_constr(LinExpr.term(x), "=", xv, "fix.x")
        m.add_constr(LinExpr.term(y), "=", yv, "fix.y")
        a = lin((2.0, x), constant=1.0)     # 2x + 1
        b = lin((3.0, y), constant=-2.0)    # 3y - 2
        out = m.add_var("out", lb=-INF)
        m.linearize_min(out, a, b, 50.0, 50.0)
        m.add_objective("max", LinExpr.term(out))
        sol = solve.solve_milp(m)
        assert sol.status == solve.OPTIMAL
        assert sol.objective == pytest.approx(min(2 * xv + 1, 3 * yv - 2),
                                              abs=1e-7)


def test_linearize_abs_negative_constant():
    m = Model()
    out = m.add_var("out")
    m.linearize_abs(out, LinExpr.const(-4.0))
    m.add_objective("min", LinExpr.term(out))
    sol = solve.solve_lp(m)
    assert sol.objective == pytest.approx(4.0, abs=1e-9)


def test_linearize_abs_zero():
    m = Model()
    out = m.add_var("out")
    m.linearize_abs(out, LinExpr.const(0.0))
    m.add_objective("min", LinExpr.term(out))
    assert solve.solve_lp(m).objective == pytest.approx(0.0, abs=1e-12)


def test_format_number():
    assert format_number(3.0) == "3"
    assert format_number(-2.5) == "-2.5"
    assert format_number(1e-9) == "0.000000001"
    assert format_number(123456789012.0) == "123456789012"
    assert "e" not in format_number(0.1234567890123)


def test_export_empty_model_skeleton(tmp_path):
    m = Model()
    path = tmp_path / "empty.lp"
    export_lp(m, str(path))
    text = path.read_text()
    assert text.startswith("Minimize\n obj: 0\nSubject To\n")
    assert text.rstrip().endswith("End")


def test_export_deterministic_bytes(tmp_path):
    def build():
        m = Model()
        x = m.add_var("x", ub=5)
        y = m.add_var("y", domain="integer", ub=9)
        m.add_constr(lin((1, x), (2, y)), "<=", 7.5, "c.one[1]")
        m.add_constr(lin((1, x), (-1, y)), ">=", -1.0, "c.two[2]")
        m.add_objective("min", lin((3, x), (1, y), constant=0.25))
        return m

    p1, p2 = tmp_path / "a.lp", tmp_path / "b.lp"
    export_lp(build(), str(p1))
    export_lp(build(), str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_export_round_trip_through_solver(tmp_path):
    m = Model()
    x = m.add_var("x")
    m.add_constr(LinExpr.term(x), ">=", 2.0, "c.lb")
    m.add_objective("min", LinExpr.term(x))
    path = tmp_path / "m.lp"
    export_lp(m, str(path))
    back = parse_lp(str(path))
    sol = solve.solve_lp(back)
    assert sol.status == solve.OPTIMAL
    assert sol.objective == pytest.approx(2.0, abs=1e-9)


def test_export_round_trip_milp(tmp_path):
    m = Model()
    x = m.add_var("x", domain="integer", ub=10)
    y = m.add_var("y", domain="binary")
    m.add_constr(lin((2, x), (3, y)), "<=", 7.0, "cap")
    m.add_objective("max", lin((3, x), (5, y)))
    direct = solve.solve_milp(m).objective
    path = tmp_path / "m.lp"
    export_lp(m, str(path))
    back = parse_lp(str(path))
    again = solve.solve_milp(back).objective
    assert again == pytest.approx(direct, abs=1e-9)


def test_export_refuses_multi_objective(tmp_path):
    m = Model()
    x = m.add_var("x", ub=1)
    m.add_objective("min", LinExpr.term(x))
    m.add_objective("max", LinExpr.term(x))
    with pytest.raises(ModelError):
        export_lp(m, str(tmp_path / "no.lp"))


def test_render_contains_sections():
    m = Model()
    x = m.add_var("x", domain="binary")
    y = m.add_var("y", domain="integer", ub=4)
    z = m.add_var("z[a]", ("idx", 2), lb=-1, ub=3)
    m.add_constr(lin((1, x), (1, y), (1, z)), "<=", 5, "c")
    m.add_objective("min", lin((1, x)))
    text = render_lp(m)
    for section in ("Minimize", "Subject To", "Bounds", "Generals",
                    "Binaries", "End"):
        assert section in text
    assert "z_a__idx_2_" in text  # non-alphanumerics map to underscores
