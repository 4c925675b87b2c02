from fractions import Fraction

import pytest

from polyinv.formulas import Rel, atom, conj, disj, implies, negation
from polyinv.poly import Polynomial
from polyinv.smtlib import (
    emit_exists_forall_script,
    emit_satisfiability_script,
    emit_validity_script,
    formula_term,
    parse_solver_reply,
    poly_term,
    rational_term,
)

from conftest import make_vars

VS = ("x", "y")


class TestEmission:
    def test_rational_terms(self):
        assert rational_term(Fraction(1, 2)) == "(/ 1 2)"
        assert rational_term(Fraction(-1)) == "(- 1)"
        assert rational_term(Fraction(-3, 4)) == "(- (/ 3 4))"
        assert rational_term(Fraction(7)) == "7"

    def test_poly_term(self, xy):
        x, y = xy
        assert poly_term(x + y**2) == "(+ (* y y) x)"
        assert poly_term(Polynomial.zero(VS)) == "0"
        assert poly_term(-2 * x) == "(* (- 2) x)"

    def test_formula_terms(self, xy):
        x, y = xy
        assert formula_term(atom(x, Rel.GE)) == "(>= x 0)"
        assert formula_term(atom(x, Rel.NE)) == "(not (= x 0))"
        f = implies(conj(atom(x, Rel.GT), atom(y, Rel.LT)), disj(atom(x + y, Rel.EQ)))
        assert formula_term(f) == "(=> (and (> x 0) (< y 0)) (= (+ x y) 0))"

    def test_validity_script_shape(self, xy):
        x, y = xy
        script = emit_validity_script(atom(x + y, Rel.GE), VS)
        lines = script.splitlines()
        assert lines[0] == "(set-info :smt-lib-version 2.6)"
        assert lines[1] == "(set-logic QF_NRA)"
        assert "(declare-const x Real)" in lines
        assert "(declare-const y Real)" in lines
        assert "(assert (not (>= (+ x y) 0)))" in lines
        assert lines[-2] == "(check-sat)"
        assert lines[-1] == "(get-model)"

    def test_byte_stability(self, xy):
        x, y = xy
        f1 = implies(atom(x - y, Rel.GE), atom(x**2 - y, Rel.GT))
        f2 = implies(
            atom(Polynomial.variable(VS, "x") - Polynomial.variable(VS, "y"), Rel.GE),
            atom(Polynomial.variable(VS, "x") ** 2 - Polynomial.variable(VS, "y"), Rel.GT),
        )
        assert emit_validity_script(f1, VS) == emit_validity_script(f2, VS)

    def test_exists_forall_script(self, xy):
        x, _ = xy
        ctx = ("x", "a")
        cx, ca = make_vars(*ctx)
        script = emit_exists_forall_script(atom(cx - ca, Rel.GE), ("a",), ("x",))
        assert "(declare-const a Real)" in script
        assert "(assert (forall ((x Real)) (>= (+ x (* (- 1) a)) 0)))" in script

    def test_satisfiability_script(self, xy):
        x, _ = xy
        script = emit_satisfiability_script(atom(x, Rel.GT), VS)
        assert "(assert (> x 0))" in script


class TestReplyParsing:
    def test_unsat_with_trailing_error(self):
        reply = parse_solver_reply(
            'unsat\n(error "line 9 column 10: model is not available")\n'
        )
        assert reply.status == "unsat"
        assert reply.model == {}

    def test_sat_with_rational_model(self):
        text = """sat
(
  (define-fun x () Real
    (/ 3.0 2.0))
  (define-fun y () Real
    (- 1.0))
)
"""
        reply = parse_solver_reply(text)
        assert reply.status == "sat"
        assert reply.rational_model == {"x": Fraction(3, 2), "y": Fraction(-1)}

    def test_sat_with_model_keyword(self):
        text = "sat\n(model\n  (define-fun x () Real 2.0)\n)\n"
        reply = parse_solver_reply(text)
        assert reply.rational_model == {"x": Fraction(2)}

    def test_negative_fraction_nested(self):
        text = "sat\n(\n  (define-fun x () Real (- (/ 1.0 8.0)))\n)\n"
        reply = parse_solver_reply(text)
        assert reply.rational_model == {"x": Fraction(-1, 8)}

    def test_root_obj_flagged_inexact(self):
        text = "sat\n(\n  (define-fun x () Real (root-obj (+ (^ x 2) (- 2)) 2))\n)\n"
        reply = parse_solver_reply(text)
        assert reply.rational_model is None
        approx = reply.approx_model
        assert approx and abs(approx["x"] - 2**0.5) < 1e-9

    def test_unknown_status(self):
        assert parse_solver_reply("unknown\n").status == "unknown"

    def test_garbage_is_error(self):
        assert parse_solver_reply("segfault lol\n").status == "error"


class TestLiveSolver:
    def test_trivial_roundtrip(self, solver_cfg):
        from polyinv.solver import run_script

        script = emit_validity_script(
            implies(atom(make_vars("x")[0], Rel.GE), atom(make_vars("x")[0], Rel.GE)),
            ("x",),
        )
        result = run_script(script, solver_cfg)
        assert result.ok
        assert parse_solver_reply(result.stdout).status == "unsat"
