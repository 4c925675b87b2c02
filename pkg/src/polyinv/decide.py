"""Verdicts: invariance checking and template-based generation.

Checking builds the invariance goals for the problem's shape (a single
equation over the whole space, a single nonstrict atom against a single
nonstrict domain atom, or the general three-part condition), discharges
what can be settled exactly (finite initial point sets by evaluation,
derivative conditions by ideal membership), and sends the remaining
universally quantified goals to the external solver as separate queries
so a failure names the violated condition.

Every Invalid verdict with a rational witness is re-checked under exact
arithmetic before being reported; a witness that fails the re-check
downgrades the verdict to Unknown rather than being reported unsoundly.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .formulas import (
    And,
    Atom,
    FalseF,
    Formula,
    Goal,
    GOAL_EQ_DERIVS,
    Implies,
    Not,
    Or,
    TrueF,
    Problem,
    RankBoundCache,
    Rel,
    equation_invariance_goals,
    evaluate,
    implies,
    invariance_goals,
    main_condition,
    simple_invariance_goals,
    substitute,
)
from .groebner import DEFAULT_CAP, FixedPointNotReached, ideal_member
from .poly import Polynomial
from .qescript import emit_qe_script, parse_qe_result
from .smtlib import (
    emit_exists_forall_script,
    emit_satisfiability_script,
    emit_validity_script,
    parse_solver_reply,
)
from .solver import SolverConfig, run_script

VALID = "valid"
INVALID = "invalid"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: Optional[Dict[str, Fraction]] = None
    witness_approx: Optional[Dict[str, float]] = None
    witness_exact: bool = True
    reason: Optional[str] = None
    goal: Optional[str] = None

    @property
    def is_valid(self) -> bool:
        return self.status == VALID

    @property
    def is_invalid(self) -> bool:
        return self.status == INVALID

    def exit_code(self) -> int:
        return {VALID: 0, INVALID: 1}.get(self.status, 2)


@dataclass
class GoalOutcome:
    name: str
    verdict: Verdict
    elapsed_s: float = 0.0
    discharged_by: str = "solver"  # solver | evaluation | membership | trivial


class TranscriptSink:
    """Writes numbered script/reply pairs for reports to reference."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.entries: List[Dict[str, str]] = []

    def record(self, label: str, script: str, reply: str) -> None:
        stem = f"{len(self.entries):03d}-{label}"
        script_path = self.directory / f"{stem}.smt2"
        reply_path = self.directory / f"{stem}.out"
        script_path.write_text(script)
        reply_path.write_text(reply)
        self.entries.append(
            {"goal": label, "script": str(script_path), "reply": str(reply_path)}
        )


def _zero_point(vars: Sequence[str]) -> Dict[str, Fraction]:
    return {v: Fraction(0) for v in vars}


def _numeric_falsifies(f: Formula, point: Mapping[str, float], tol: float = 1e-7) -> bool:
    """Float check that a point falsifies the formula (for inexact models)."""

    def val(p: Polynomial) -> float:
        return float(
            sum(
                float(c) * _prod(point, p.vars, e)
                for e, c in p.terms.items()
            )
        )

    def _prod(pt, vars, exps):
        out = 1.0
        for v, e in zip(vars, exps):
            if e:
                out *= pt.get(v, 0.0) ** e
        return out

    def ev(g: Formula) -> bool:
        if isinstance(g, TrueF):
            return True
        if isinstance(g, FalseF):
            return False
        if isinstance(g, Atom):
            v = val(g.poly)
            if g.rel is Rel.GE:
                return v >= -tol
            if g.rel is Rel.GT:
                return v > tol
            if g.rel is Rel.LE:
                return v <= tol
            if g.rel is Rel.LT:
                return v < -tol
            if g.rel is Rel.EQ:
                return abs(v) <= tol
            return abs(v) > tol
        if isinstance(g, And):
            return all(ev(a) for a in g.args)
        if isinstance(g, Or):
            return any(ev(a) for a in g.args)
        if isinstance(g, Not):
            return not ev(g.arg)
        if isinstance(g, Implies):
            return (not ev(g.lhs)) or ev(g.rhs)
        raise TypeError(g)

    return not ev(f)


def check_validity(
    f: Formula,
    vars: Sequence[str],
    cfg: SolverConfig,
    label: str = "goal",
    transcript: Optional[TranscriptSink] = None,
) -> Verdict:
    """Valid iff the negation is unsatisfiable over the reals."""
    if isinstance(f, TrueF):
        return Verdict(VALID)
    if isinstance(f, FalseF):
        return Verdict(INVALID, witness=_zero_point(vars))
    script = emit_validity_script(f, vars, logic=cfg.logic)
    result = run_script(script, cfg)
    if transcript is not None:
        transcript.record(label, script, result.stdout or result.stderr)
    if result.launch_error:
        return Verdict(UNKNOWN, reason=f"solver launch failure: {result.launch_error}")
    if result.timed_out:
        return Verdict(UNKNOWN, reason=f"solver timeout after {cfg.timeout_s:g}s")
    reply = parse_solver_reply(result.stdout)
    if reply.status == "unsat":
        return Verdict(VALID)
    if reply.status == "unknown":
        return Verdict(UNKNOWN, reason="solver returned unknown")
    if reply.status != "sat":
        detail = (result.stderr or result.stdout).strip().splitlines()
        return Verdict(
            UNKNOWN,
            reason="unparseable solver output"
            + (f": {detail[0]}" if detail else ""),
        )
    exact = reply.rational_model
    if exact is not None:
        witness = {v: exact.get(v, Fraction(0)) for v in vars}
        if evaluate(f, witness):
            # soundness gate: the model does not falsify the formula
            return Verdict(
                UNKNOWN, reason="solver witness failed exact re-evaluation"
            )
        return Verdict(INVALID, witness=witness)
    approx = reply.approx_model
    witness_approx = {v: approx.get(v, 0.0) for v in vars}
    if _numeric_falsifies(f, witness_approx):
        return Verdict(
            INVALID,
            witness_approx=witness_approx,
            witness_exact=False,
            reason="witness contains irrational algebraic values; re-checked numerically",
        )
    return Verdict(
        UNKNOWN, reason="irrational witness failed the numeric re-check"
    )


# -- exact discharges -------------------------------------------------------


def as_point_set(f: Formula, vars: Sequence[str]) -> Optional[List[Dict[str, Fraction]]]:
    """Decode a formula that pins every variable to finitely many rational
    points (a union of conjunctions of linear single-variable equations)."""
    disjuncts = f.args if isinstance(f, Or) else (f,)
    points = []
    for d in disjuncts:
        conjuncts = d.args if isinstance(d, And) else (d,)
        point: Dict[str, Fraction] = {}
        for c in conjuncts:
            if not (isinstance(c, Atom) and c.rel is Rel.EQ):
                return None
            occurring = c.poly.occurring_vars()
            if len(occurring) != 1:
                return None
            (v,) = occurring
            if c.poly.total_degree() != 1:
                return None
            i = c.poly.vars.index(v)
            lin = tuple(1 if j == i else 0 for j in range(len(c.poly.vars)))
            zero = (0,) * len(c.poly.vars)
            slope = c.poly.coefficient(lin)
            if set(c.poly.terms) - {lin, zero}:
                return None
            value = -c.poly.coefficient(zero) / slope
            if v in point and point[v] != value:
                return None  # contradictory conjunct: not a point
            point[v] = value
        if set(point) != set(vars):
            return None
        points.append(point)
    return points


def _discharge_exactly(goal: Goal, prob: Problem) -> Optional[Verdict]:
    """Settle a goal without the solver when exact means suffice."""
    f = goal.formula
    if isinstance(f, TrueF):
        return Verdict(VALID, goal=goal.name)
    if isinstance(f, FalseF):
        return Verdict(INVALID, witness=_zero_point(prob.vars), goal=goal.name)
    # a finite antecedent point set reduces validity to evaluation
    if isinstance(f, Implies):
        points = as_point_set(f.lhs, prob.vars)
        if points is not None:
            for pt in points:
                if not evaluate(f, pt):
                    return Verdict(INVALID, witness=pt, goal=goal.name)
            return Verdict(VALID, goal=goal.name)
    # the derivative goal of an equational candidate follows from ideal
    # membership of each chain element in the candidate's ideal
    if goal.name == GOAL_EQ_DERIVS and isinstance(f, Implies) and isinstance(f.lhs, Atom):
        p = f.lhs.poly
        rhs = f.rhs
        conjuncts = rhs.args if isinstance(rhs, And) else (rhs,)
        polys = []
        for c in conjuncts:
            if not (isinstance(c, Atom) and c.rel is Rel.EQ):
                return None
            polys.append(c.poly)
        if all(ideal_member(q, [p]) for q in polys):
            return Verdict(VALID, goal=goal.name)
    return None


# -- goal construction and dispatch ----------------------------------------


def _single_atom(f: Formula) -> Optional[Atom]:
    return f if isinstance(f, Atom) else None


def build_goals(prob: Problem, cache: RankBoundCache) -> Tuple[str, List[Goal]]:
    """Pick the encoding for the problem's shape and build its goals."""
    cand = _single_atom(prob.candidate)
    dom = _single_atom(prob.domain)
    if cand is not None and cand.rel is Rel.EQ and isinstance(prob.domain, TrueF):
        return "equational", equation_invariance_goals(cand.poly, prob.init, cache)
    if cand is not None and cand.rel is Rel.GE and dom is not None and dom.rel is Rel.GE:
        return "simple", simple_invariance_goals(
            dom.poly, cand.poly, prob.init, cache
        )
    return "general", invariance_goals(prob, cache)


@dataclass
class CheckResult:
    verdict: Verdict
    shape: str
    goals: List[GoalOutcome] = field(default_factory=list)
    rank_bounds: Dict[str, int] = field(default_factory=dict)

    @property
    def solver_calls(self) -> int:
        return sum(1 for g in self.goals if g.discharged_by == "solver")


def _dispatch_goals(
    goals: List[Goal],
    prob: Problem,
    cfg: SolverConfig,
    transcript: Optional[TranscriptSink] = None,
) -> List[GoalOutcome]:
    outcomes: List[Optional[GoalOutcome]] = [None] * len(goals)
    pending: List[Tuple[int, Goal]] = []
    for i, g in enumerate(goals):
        exact = _discharge_exactly(g, prob)
        if exact is not None:
            by = "trivial" if isinstance(g.formula, (TrueF, FalseF)) else "evaluation"
            if g.name == GOAL_EQ_DERIVS and exact.is_valid and not isinstance(g.formula, TrueF):
                by = "membership"
            outcomes[i] = GoalOutcome(g.name, exact, discharged_by=by)
        else:
            pending.append((i, g))

    def run(item: Tuple[int, Goal]) -> Tuple[int, GoalOutcome]:
        i, g = item
        start = time.monotonic()
        v = check_validity(g.formula, prob.vars, cfg, label=g.name, transcript=transcript)
        v = replace(v, goal=g.name) if v.goal is None else v
        return i, GoalOutcome(g.name, v, elapsed_s=time.monotonic() - start)

    if len(pending) > 1 and cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.workers, len(pending))) as pool:
            for i, outcome in pool.map(run, pending):
                outcomes[i] = outcome
    else:
        for item in pending:
            i, outcome = run(item)
            outcomes[i] = outcome
    return [o for o in outcomes if o is not None]


def _aggregate(outcomes: List[GoalOutcome]) -> Verdict:
    for o in outcomes:
        if o.verdict.is_invalid:
            return replace(o.verdict, goal=o.name)
    for o in outcomes:
        if o.verdict.status == UNKNOWN:
            return replace(o.verdict, goal=o.name)
    return Verdict(VALID)


def check_invariant(
    prob: Problem,
    values: Optional[Mapping[str, Fraction]] = None,
    cfg: Optional[SolverConfig] = None,
    cap: int = DEFAULT_CAP,
    transcript: Optional[TranscriptSink] = None,
) -> CheckResult:
    """Decide whether the (instantiated) candidate is a continuous invariant."""
    if prob.params:
        if values is None:
            raise ValueError(
                "problem has parameters; supply values (-p) or run generation"
            )
        closed = prob.instantiated(values)
    else:
        if values:
            raise ValueError("problem has no parameters to instantiate")
        closed = prob
    if cfg is None:
        # goals that survive exact discharge will then report Unknown
        cfg = SolverConfig(("polyinv-unconfigured-solver",))
    cache = RankBoundCache(prob.field, params=prob.params, cap=cap)
    try:
        shape, goals = build_goals(prob, cache)
    except FixedPointNotReached as exc:
        return CheckResult(Verdict(UNKNOWN, reason=str(exc)), "unknown")
    if values:
        goals = [
            Goal(g.name, substitute(g.formula, dict(values))) for g in goals
        ]
    outcomes = _dispatch_goals(goals, closed, cfg, transcript)
    bounds = {
        str(p): rb.value for p, rb in cache.known_bounds().items()
    }
    return CheckResult(_aggregate(outcomes), shape, outcomes, bounds)


def check_init_subset_domain(
    prob: Problem, cfg: SolverConfig, transcript: Optional[TranscriptSink] = None
) -> Verdict:
    """Validity of init -> domain; a failure is a modeling warning."""
    goal = Goal("init-in-domain", implies(prob.init, prob.domain))
    exact = _discharge_exactly(goal, prob)
    if exact is not None:
        return exact
    return check_validity(
        goal.formula, prob.vars, cfg, label=goal.name, transcript=transcript
    )


# -- generation --------------------------------------------------------------

MODE_WITNESSES = "witness-list"
MODE_CONSTRAINT = "constraint-formula"
MODE_UNKNOWN = "unknown"


@dataclass
class GenerationResult:
    mode: str
    witnesses: List[Dict[str, Fraction]] = field(default_factory=list)
    constraint: Optional[Formula] = None
    reason: Optional[str] = None
    checks: List[Tuple[Dict[str, Fraction], Verdict]] = field(default_factory=list)


def generate_constraint(
    prob: Problem,
    cfg: SolverConfig,
    strategy: str = "grid",
    grid: Optional[Mapping[str, Sequence[Fraction]]] = None,
    cap: int = DEFAULT_CAP,
    qe_result_text: Optional[str] = None,
    transcript: Optional[TranscriptSink] = None,
) -> GenerationResult:
    """Search for parameter values that make the candidate an invariant.

    Strategies: ``grid`` re-checks every tuple of a finite grid (witness
    semantics are relative to the grid, never a nonexistence claim);
    ``exists`` asks a quantifier-capable backend for one instantiation;
    ``qe-result`` parses a constraint file produced by an external QE
    tool on the emitted script.
    """
    if not prob.params:
        raise ValueError("problem declares no parameters to solve for")
    if strategy == "grid":
        if not grid:
            raise ValueError("grid strategy needs a --grid specification")
        result = GenerationResult(MODE_WITNESSES)
        names = list(prob.params)
        for combo in itertools.product(*(grid[u] for u in names)):
            assignment = dict(zip(names, combo))
            outcome = check_invariant(prob, assignment, cfg, cap, transcript)
            result.checks.append((assignment, outcome.verdict))
            if outcome.verdict.is_valid:
                result.witnesses.append(assignment)
        return result
    if strategy == "exists":
        if not cfg.supports_quantifiers:
            return GenerationResult(
                MODE_UNKNOWN, reason="backend does not advertise quantifier support"
            )
        cache = RankBoundCache(prob.field, params=prob.params, cap=cap)
        try:
            matrix = main_condition(prob, cache)
        except FixedPointNotReached as exc:
            return GenerationResult(MODE_UNKNOWN, reason=str(exc))
        script = emit_exists_forall_script(matrix, prob.params, prob.vars)
        run = run_script(script, cfg)
        if transcript is not None:
            transcript.record("exists-forall", script, run.stdout or run.stderr)
        if not run.ok:
            reason = run.launch_error or f"solver timeout after {cfg.timeout_s:g}s"
            return GenerationResult(MODE_UNKNOWN, reason=reason)
        reply = parse_solver_reply(run.stdout)
        if reply.status == "unsat":
            return GenerationResult(
                MODE_WITNESSES,
                reason="no instantiation of this template is an invariant",
            )
        if reply.status != "sat":
            return GenerationResult(MODE_UNKNOWN, reason="solver returned unknown")
        exact = reply.rational_model
        if exact is None:
            return GenerationResult(
                MODE_UNKNOWN, reason="backend produced an irrational instantiation"
            )
        assignment = {u: exact.get(u, Fraction(0)) for u in prob.params}
        outcome = check_invariant(prob, assignment, cfg, cap, transcript)
        result = GenerationResult(MODE_WITNESSES, checks=[(assignment, outcome.verdict)])
        if outcome.verdict.is_valid:
            result.witnesses.append(assignment)
        else:
            result.reason = "backend instantiation failed re-verification"
        return result
    if strategy == "qe-result":
        if qe_result_text is None:
            raise ValueError("qe-result strategy needs the returned constraint file")
        constraint = parse_qe_result(qe_result_text, prob.params)
        return GenerationResult(MODE_CONSTRAINT, constraint=constraint)
    raise ValueError(f"unknown generation strategy {strategy!r}")


def emit_generation_qe_script(prob: Problem, cap: int = DEFAULT_CAP) -> str:
    """The universally quantified matrix for hand-feeding a QE tool."""
    cache = RankBoundCache(prob.field, params=prob.params, cap=cap)
    matrix = main_condition(prob, cache)
    return emit_qe_script(matrix, prob.vars, prob.params)


def pick_sample(
    result: GenerationResult,
    params: Sequence[str],
    cfg: Optional[SolverConfig] = None,
) -> Optional[Dict[str, Fraction]]:
    """Deterministic representative: lexicographically smallest witness by
    parameter order; for a constraint formula, one satisfiability query."""
    if result.mode == MODE_WITNESSES:
        if not result.witnesses:
            return None
        return min(result.witnesses, key=lambda w: tuple(w[u] for u in params))
    if result.mode == MODE_CONSTRAINT and result.constraint is not None:
        if cfg is None:
            return None
        script = emit_satisfiability_script(result.constraint, params, logic=cfg.logic)
        run = run_script(script, cfg)
        if not run.ok:
            return None
        reply = parse_solver_reply(run.stdout)
        exact = reply.rational_model if reply.status == "sat" else None
        if exact is None:
            return None
        return {u: exact.get(u, Fraction(0)) for u in params}
    return None
