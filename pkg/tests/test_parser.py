from fractions import Fraction
from pathlib import Path

import pytest

from polyinv.formulas import TRUE, And, Atom, Implies, Not, Or, Rel, evaluate
from polyinv.parser import (
    ParseError,
    format_problem,
    parse_assignments,
    parse_grid,
    parse_problem,
    parse_rational,
)
from polyinv.poly import Polynomial

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def load(name):
    return (PROBLEMS / name).read_text()


class TestProblemFiles:
    def test_template_2d(self):
        prob = parse_problem(load("template_2d.prob"))
        assert prob.vars == ("x", "y")
        assert prob.params == ("a",)
        x, y = (Polynomial.variable(("x", "y"), v) for v in ("x", "y"))
        assert prob.field.components == (-2 * y, x**2)
        ctx = ("x", "y", "a")
        cx, cy, ca = (Polynomial.variable(ctx, v) for v in ctx)
        assert prob.domain == Atom(-cx - cy**2, Rel.GE)
        assert isinstance(prob.init, Or) and len(prob.init.args) == 2
        assert prob.candidate == Atom(ca * cy * (cx - cy), Rel.GE)
        assert prob.is_parametric

    def test_omitted_domain_is_whole_space(self):
        prob = parse_problem(load("disjunctive_2d.prob"))
        assert prob.domain is TRUE

    def test_all_sample_files_parse(self):
        for path in sorted(PROBLEMS.glob("*.prob")):
            prob = parse_problem(path.read_text())
            assert prob.vars

    def test_decimals_and_quotients_identical(self):
        a = parse_problem(
            "vars: x\nfield: x' = 0.5*x\ninit: x = 0.5\ninvariant: x >= 0\n"
        )
        b = parse_problem(
            "vars: x\nfield: x' = 1/2*x\ninit: x = 1/2\ninvariant: x >= 0\n"
        )
        assert a.field == b.field
        assert a.init == b.init


class TestErrors:
    def test_undeclared_variable(self):
        text = "vars: x\nfield: x' = x\ninit: x = 0\ninvariant: z >= 0\n"
        with pytest.raises(ParseError, match="undeclared variable 'z'"):
            parse_problem(text)

    def test_error_carries_position(self):
        text = "vars: x\nfield: x' = x\ninit: x = 0\ninvariant: z >= 0\n"
        with pytest.raises(ParseError, match="line 4"):
            parse_problem(text)

    def test_field_arity_mismatch(self):
        text = "vars: x, y\nfield: x' = y\ninit: x = 0\ninvariant: x >= 0\n"
        with pytest.raises(ParseError, match="missing equation"):
            parse_problem(text)

    def test_parameter_in_field_rejected(self):
        text = (
            "vars: x\nparams: a\nfield: x' = a*x\ninit: x = 0\ninvariant: a*x >= 0\n"
        )
        with pytest.raises(ParseError, match="cannot appear in the vector field"):
            parse_problem(text)

    def test_unknown_section(self):
        with pytest.raises(ParseError, match="unknown section"):
            parse_problem("vars: x\nflow: x' = x\ninit: x=0\ninvariant: x>=0\n")

    def test_missing_section(self):
        with pytest.raises(ParseError, match="missing required section 'invariant'"):
            parse_problem("vars: x\nfield: x' = x\ninit: x = 0\n")

    def test_syntax_error_position(self):
        with pytest.raises(ParseError, match="column"):
            parse_problem("vars: x\nfield: x' = x +\ninit: x = 0\ninvariant: x >= 0\n")

    def test_division_by_polynomial_rejected(self):
        with pytest.raises(ParseError, match="only defined by constants"):
            parse_problem(
                "vars: x\nfield: x' = 1/x\ninit: x = 1\ninvariant: x >= 0\n"
            )

    def test_duplicate_variable(self):
        with pytest.raises(ParseError, match="duplicate variable"):
            parse_problem("vars: x, x\nfield: x' = x\ninit: x=0\ninvariant: x>=0\n")


class TestFormulaGrammar:
    def _parse_with(self, invariant):
        return parse_problem(
            f"vars: x, y\nfield: x' = y; y' = x\ninit: x = 0 & y = 0\n"
            f"invariant: {invariant}\n"
        ).candidate

    def test_precedence_and_over_or(self):
        f = self._parse_with("x >= 0 & y >= 0 | x < 0")
        assert isinstance(f, Or)
        assert isinstance(f.args[0], And)

    def test_implication_lowest_right_assoc(self):
        f = self._parse_with("x >= 0 -> y >= 0 -> x + y >= 0")
        assert isinstance(f, Implies)
        assert isinstance(f.rhs, Implies)

    def test_negation(self):
        f = self._parse_with("!(x > 0)")
        assert isinstance(f, Not)

    def test_formula_parens_vs_arith_parens(self):
        f = self._parse_with("(x + y)^2 >= 0 & (x = 0 | y = 0)")
        assert isinstance(f, And)

    def test_relation_both_sides(self):
        f = self._parse_with("x + 1 >= y")
        ctx = ("x", "y")
        x, y = (Polynomial.variable(ctx, v) for v in ctx)
        assert f == Atom(x + 1 - y, Rel.GE)

    def test_true_false_keywords(self):
        assert self._parse_with("true") is TRUE

    def test_power_binds_tighter_than_unary_minus(self):
        f = self._parse_with("-x^2 <= 0")
        ctx = ("x", "y")
        x, _ = (Polynomial.variable(ctx, v) for v in ctx)
        # -x^2 means -(x^2); the written relation is kept until DNF time
        assert f == Atom(-(x**2), Rel.LE)


class TestRoundTrip:
    @pytest.mark.parametrize(
        "name",
        [
            "template_2d.prob",
            "disjunctive_2d.prob",
            "train_brake.prob",
            "aircraft_turn.prob",
            "aircraft_turn_linear.prob",
            "aircraft_turn_quadratic.prob",
        ],
    )
    def test_parse_print_parse(self, name):
        prob = parse_problem(load(name))
        printed = format_problem(prob)
        again = parse_problem(printed)
        assert again.vars == prob.vars
        assert again.params == prob.params
        assert again.field == prob.field
        assert again.domain == prob.domain
        assert again.init == prob.init
        assert again.candidate == prob.candidate


class TestFlagHelpers:
    def test_parse_rational(self):
        assert parse_rational("0.5") == Fraction(1, 2)
        assert parse_rational("1/2") == Fraction(1, 2)
        assert parse_rational("-3") == -3

    def test_parse_assignments(self):
        out = parse_assignments(["a=-1", "b=0.5"], ("a", "b"))
        assert out == {"a": -1, "b": Fraction(1, 2)}

    def test_parse_assignments_unknown(self):
        with pytest.raises(ValueError, match="unknown parameter"):
            parse_assignments(["c=1"], ("a",))

    def test_parse_grid(self):
        grid = parse_grid("a=-2:2:1,b=-1:1:1", ("a", "b"))
        assert grid["a"] == [-2, -1, 0, 1, 2]
        assert grid["b"] == [-1, 0, 1]

    def test_parse_grid_fractional_step(self):
        grid = parse_grid("a=0:1:0.5", ("a",))
        assert grid["a"] == [0, Fraction(1, 2), 1]

    def test_parse_grid_missing_param(self):
        with pytest.raises(ValueError, match="does not cover"):
            parse_grid("a=0:1:1", ("a", "b"))
