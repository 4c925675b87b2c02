from fractions import Fraction
from pathlib import Path

import pytest

from polyinv.decide import (
    GenerationResult,
    MODE_CONSTRAINT,
    MODE_WITNESSES,
    TranscriptSink,
    Verdict,
    as_point_set,
    check_init_subset_domain,
    check_invariant,
    check_validity,
    generate_constraint,
    pick_sample,
)
from polyinv.formulas import TRUE, Rel, atom, conj, disj, evaluate, implies
from polyinv.parser import parse_grid, parse_problem
from polyinv.poly import Polynomial
from polyinv.solver import SolverConfig

from conftest import make_vars

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"

# a config whose command cannot run: proves a path used no solver
NO_SOLVER = SolverConfig(("polyinv-test-no-solver-was-expected",))


def load(name):
    return parse_problem((PROBLEMS / name).read_text())


class TestCheckValidity:
    def test_tautology_short_circuit(self):
        assert check_validity(TRUE, ("x",), NO_SOLVER).is_valid

    def test_reflexive_implication(self, solver_cfg, xy):
        x, _ = xy
        f = implies(atom(x, Rel.GE), atom(x, Rel.GE))
        assert check_validity(f, ("x", "y"), solver_cfg).is_valid

    def test_strict_boundary_counterexample(self, solver_cfg, xy):
        x, _ = xy
        v = check_validity(atom(x, Rel.GT), ("x", "y"), solver_cfg)
        assert v.is_invalid
        assert v.witness is not None
        assert not evaluate(atom(x, Rel.GT), v.witness)

    def test_unknown_on_launch_failure(self, xy):
        x, _ = xy
        v = check_validity(atom(x, Rel.GT), ("x", "y"), NO_SOLVER)
        assert v.status == "unknown"
        assert "launch" in v.reason


class TestPointSets:
    def test_two_point_init(self):
        prob = load("template_2d.prob")
        points = as_point_set(prob.init, prob.vars)
        assert points == [
            {"x": -1, "y": Fraction(1, 2)},
            {"x": Fraction(-1, 2), "y": Fraction(-3, 5)},
        ]

    def test_halfplane_is_not_points(self, xy):
        x, y = xy
        assert as_point_set(atom(x + y, Rel.GE), ("x", "y")) is None

    def test_underdetermined_is_not_points(self, xy):
        x, _ = xy
        assert as_point_set(atom(x - 1, Rel.EQ), ("x", "y")) is None

    def test_scaled_equation(self):
        vs = ("x",)
        x = Polynomial.variable(vs, "x")
        points = as_point_set(atom(2 * x - 1, Rel.EQ), vs)
        assert points == [{"x": Fraction(1, 2)}]


class TestCheckInvariant:
    def test_template_good_value(self, solver_cfg):
        prob = load("template_2d.prob")
        result = check_invariant(prob, {"a": -1}, solver_cfg)
        assert result.verdict.is_valid
        assert result.shape == "simple"
        assert result.rank_bounds
        assert all(n == 2 for n in result.rank_bounds.values())

    def test_template_bad_value_witness(self, solver_cfg):
        prob = load("template_2d.prob")
        result = check_invariant(prob, {"a": 1}, solver_cfg)
        assert result.verdict.is_invalid
        assert result.verdict.goal == "init-in-candidate"
        assert result.verdict.witness == {"x": -1, "y": Fraction(1, 2)}

    def test_disjunctive_good_pair(self, solver_cfg):
        prob = load("disjunctive_2d.prob")
        result = check_invariant(prob, {"a": -1, "b": Fraction(-1, 2)}, solver_cfg)
        assert result.verdict.is_valid
        assert result.shape == "general"

    def test_disjunctive_bad_pair(self, solver_cfg):
        prob = load("disjunctive_2d.prob")
        result = check_invariant(prob, {"a": 1, "b": 1}, solver_cfg)
        assert result.verdict.is_invalid
        w = result.verdict.witness
        assert w is not None
        # the witness satisfies the initial set but not the candidate
        assert evaluate(prob.instantiated({"a": 1, "b": 1}).init, w)
        assert not evaluate(prob.instantiated({"a": 1, "b": 1}).candidate, w)

    def test_train_domain_equals_candidate(self, solver_cfg):
        result = check_invariant(load("train_brake.prob"), None, solver_cfg)
        assert result.verdict.is_valid

    def test_aircraft_closed_no_solver_needed(self):
        # equational fast path: evaluation + ideal membership only
        result = check_invariant(load("aircraft_turn.prob"), None, NO_SOLVER)
        assert result.verdict.is_valid
        assert result.shape == "equational"
        assert result.solver_calls == 0

    def test_aircraft_all_paper_instantiations(self):
        prob = load("aircraft_turn_linear.prob")
        # with omega=1 and x0 = (x1,y1,x2,y2,d1,d2,e1,e2) = (0,0,0,0,1,0,1,0)
        listed = [
            {"u1": 0, "u2": 1, "u3": 1, "u4": 0, "u0": -1},
            {"u1": -1, "u2": 0, "u3": 0, "u4": 1, "u0": 0},
            {"u1": -1, "u2": 1, "u3": 1, "u4": 1, "u0": -1},
        ]
        for u in listed:
            result = check_invariant(prob, u, NO_SOLVER)
            assert result.verdict.is_valid, u
            assert result.solver_calls == 0

    def test_aircraft_quadratic_instantiation(self):
        prob = load("aircraft_turn_quadratic.prob")
        result = check_invariant(prob, {"u1": 1, "u2": 1, "u0": -1}, NO_SOLVER)
        assert result.verdict.is_valid
        assert result.solver_calls == 0

    def test_aircraft_bad_instantiation_caught(self, solver_cfg):
        prob = load("aircraft_turn_linear.prob")
        result = check_invariant(
            prob, {"u1": 1, "u2": 0, "u3": 0, "u4": 0, "u0": 0}, solver_cfg
        )
        assert result.verdict.is_invalid

    def test_missing_values_rejected(self):
        with pytest.raises(ValueError, match="supply values"):
            check_invariant(load("template_2d.prob"), None, NO_SOLVER)

    def test_values_for_closed_problem_rejected(self):
        with pytest.raises(ValueError, match="no parameters"):
            check_invariant(load("train_brake.prob"), {"a": 1}, NO_SOLVER)


class TestInitSubsetDomain:
    def test_finite_init_points_inside(self):
        prob = load("template_2d.prob")
        verdict = check_init_subset_domain(prob, NO_SOLVER)
        assert verdict.is_valid  # exact evaluation, no solver involved

    def test_violation_found(self, solver_cfg, xy):
        text = "vars: x\nfield: x' = x\ndomain: -x >= 0\ninit: x >= 1\ninvariant: x >= 0\n"
        verdict = check_init_subset_domain(parse_problem(text), solver_cfg)
        assert verdict.is_invalid
        assert verdict.witness["x"] >= 1


class TestGeneration:
    def test_grid_small(self, solver_cfg):
        prob = load("template_2d.prob")
        grid = parse_grid("a=-1:1:1", prob.params)
        result = generate_constraint(prob, solver_cfg, "grid", grid)
        assert [w["a"] for w in result.witnesses] == [-1, 0]
        assert len(result.checks) == 3

    def test_exists_strategy(self, solver_cfg):
        prob = load("template_2d.prob")
        result = generate_constraint(prob, solver_cfg, "exists")
        assert result.mode == MODE_WITNESSES
        assert len(result.witnesses) == 1
        assert result.witnesses[0]["a"] <= 0

    def test_qe_result_strategy(self, solver_cfg):
        prob = load("template_2d.prob")
        result = generate_constraint(
            prob, solver_cfg, "qe-result", qe_result_text="a <= 0\n"
        )
        assert result.mode == MODE_CONSTRAINT
        sample = pick_sample(result, prob.params, solver_cfg)
        assert sample is not None and sample["a"] <= 0

    def test_grid_requires_spec(self, solver_cfg):
        with pytest.raises(ValueError, match="--grid"):
            generate_constraint(load("template_2d.prob"), solver_cfg, "grid", None)

    def test_closed_problem_rejected(self, solver_cfg):
        with pytest.raises(ValueError, match="no parameters"):
            generate_constraint(load("train_brake.prob"), solver_cfg, "grid", {})


class TestPickSample:
    def test_lexicographic_minimum(self):
        result = GenerationResult(
            MODE_WITNESSES,
            witnesses=[
                {"a": Fraction(0), "b": Fraction(-1)},
                {"a": Fraction(-1), "b": Fraction(0)},
                {"a": Fraction(-1), "b": Fraction(-1)},
            ],
        )
        assert pick_sample(result, ("a", "b")) == {
            "a": Fraction(-1),
            "b": Fraction(-1),
        }

    def test_empty_list_absent(self):
        assert pick_sample(GenerationResult(MODE_WITNESSES), ("a",)) is None


class TestTranscripts:
    def test_sink_records_files(self, solver_cfg, tmp_path, xy):
        x, _ = xy
        sink = TranscriptSink(tmp_path / "t")
        check_validity(atom(x, Rel.GT), ("x", "y"), solver_cfg, "demo", sink)
        assert len(sink.entries) == 1
        entry = sink.entries[0]
        assert Path(entry["script"]).exists()
        assert Path(entry["reply"]).exists()
        assert "(check-sat)" in Path(entry["script"]).read_text()


class TestVerdictContract:
    def test_exit_codes(self):
        assert Verdict("valid").exit_code() == 0
        assert Verdict("invalid").exit_code() == 1
        assert Verdict("unknown").exit_code() == 2
