"""Numerical oracle: RK4 trajectories, invariant falsification, sign probes.

Floating point lives here and only here; nothing numeric feeds a
verdict. The falsifier hunts for counterexample trajectories to the
invariant definition, and the sign probes compare the symbolic
first-nonzero-Lie-derivative prediction against observed trajectory
behavior.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .formulas import (
    And,
    Atom,
    FalseF,
    Formula,
    Implies,
    Not,
    Or,
    Problem,
    Rel,
    TrueF,
    evaluate,
)
from .poly import Polynomial, VectorField, lie_rank_at

OVERFLOW_LIMIT = 1e12


@dataclass(frozen=True)
class SampleBudget:
    n_init_points: int = 100
    horizon: float = 10.0
    step: float = 1e-3
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.horizon <= 0 or self.step <= 0 or self.tolerance <= 0:
            raise ValueError("budget horizon, step, and tolerance must be positive")
        if self.n_init_points < 1:
            raise ValueError("need at least one initial point")


@dataclass
class Trajectory:
    """Fixed-step RK4 samples; times strictly increase from 0."""

    times: List[float]
    states: List[Tuple[float, ...]]
    step: float
    direction: str
    diverged: bool = False

    @property
    def samples(self):
        return list(zip(self.times, self.states))

    def final_state(self) -> Tuple[float, ...]:
        return self.states[-1]

    def write_csv(self, path, var_names: Sequence[str]) -> None:
        with open(path, "w") as fh:
            fh.write("t," + ",".join(var_names) + "\n")
            for t, state in zip(self.times, self.states):
                fh.write(f"{t!r}," + ",".join(repr(x) for x in state) + "\n")


def compile_poly(p: Polynomial, order: Sequence[str]) -> Callable[..., float]:
    """Float evaluator taking one positional argument per variable."""
    names = {v: f"v{i}" for i, v in enumerate(order)}
    parts = []
    for exps, coeff in p.sorted_terms():
        factors = [repr(float(coeff))]
        for v, e in zip(p.vars, exps):
            if e:
                factors.append(
                    names[v] if e == 1 else f"{names[v]}**{e}"
                )
        parts.append("*".join(factors))
    body = " + ".join(parts) if parts else "0.0"
    args = ", ".join(f"v{i}" for i in range(len(order)))
    return eval(f"lambda {args}: {body}", {"__builtins__": {}})  # noqa: S307


def compile_field(f: VectorField) -> Callable[[Tuple[float, ...]], Tuple[float, ...]]:
    fns = [compile_poly(c, f.vars) for c in f.components]
    return lambda state: tuple(fn(*state) for fn in fns)


def compile_formula(
    f: Formula, order: Sequence[str], slack: float = 0.0
) -> Callable[[Tuple[float, ...]], bool]:
    """Float truth test; positive slack loosens every comparison."""
    if isinstance(f, TrueF):
        return lambda s: True
    if isinstance(f, FalseF):
        return lambda s: False
    if isinstance(f, Atom):
        fn = compile_poly(f.poly, order)
        rel = f.rel
        if rel is Rel.GE:
            return lambda s: fn(*s) >= -slack
        if rel is Rel.GT:
            return lambda s: fn(*s) > -slack
        if rel is Rel.LE:
            return lambda s: fn(*s) <= slack
        if rel is Rel.LT:
            return lambda s: fn(*s) < slack
        if rel is Rel.EQ:
            return lambda s: abs(fn(*s)) <= slack
        return lambda s: abs(fn(*s)) > slack
    if isinstance(f, And):
        subs = [compile_formula(a, order, slack) for a in f.args]
        return lambda s: all(g(s) for g in subs)
    if isinstance(f, Or):
        subs = [compile_formula(a, order, slack) for a in f.args]
        return lambda s: any(g(s) for g in subs)
    if isinstance(f, Not):
        sub = compile_formula(f.arg, order, slack)
        return lambda s: not sub(s)
    if isinstance(f, Implies):
        lhs = compile_formula(f.lhs, order, slack)
        rhs = compile_formula(f.rhs, order, slack)
        return lambda s: (not lhs(s)) or rhs(s)
    raise TypeError(f"not a formula: {f!r}")


def integrate(
    f: VectorField,
    x0: Sequence[float],
    budget: SampleBudget,
    direction: str = "forward",
) -> Trajectory:
    """Classical fixed-step RK4 over [0, horizon]; backward runs -f,
    realizing the state at negative times."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, not {direction!r}")
    deriv = compile_field(f if direction == "forward" else f.negated())
    h = budget.step
    n_steps = max(1, round(budget.horizon / h))
    state = tuple(float(x) for x in x0)
    times = [0.0]
    states = [state]
    diverged = False
    for k in range(n_steps):
        k1 = deriv(state)
        k2 = deriv(tuple(x + 0.5 * h * d for x, d in zip(state, k1)))
        k3 = deriv(tuple(x + 0.5 * h * d for x, d in zip(state, k2)))
        k4 = deriv(tuple(x + h * d for x, d in zip(state, k3)))
        state = tuple(
            x + h / 6.0 * (a + 2 * b + 2 * c + d)
            for x, a, b, c, d in zip(state, k1, k2, k3, k4)
        )
        if any(not math.isfinite(x) or abs(x) > OVERFLOW_LIMIT for x in state):
            diverged = True
            break
        times.append((k + 1) * h)
        states.append(state)
    return Trajectory(times, states, h, direction, diverged)


# -- direct invariant testing ------------------------------------------------


@dataclass
class CIOutcome:
    kind: str  # no-violation | violation | cannot-sample
    x0: Optional[Tuple[float, ...]] = None
    t: Optional[float] = None
    detail: str = ""
    points_tried: int = 0


def sample_init_points(
    prob: Problem, budget: SampleBudget, rng: random.Random, box: float = 5.0
) -> List[Dict[str, Fraction]]:
    from .decide import as_point_set

    points = as_point_set(prob.init, prob.vars)
    if points is not None:
        return points[: budget.n_init_points]
    found: List[Dict[str, Fraction]] = []
    attempts = budget.n_init_points * 200
    span = int(box * 10)
    for _ in range(attempts):
        candidate = {
            v: Fraction(rng.randint(-span, span), 10) for v in prob.vars
        }
        if evaluate(prob.init, candidate):
            found.append(candidate)
            if len(found) >= budget.n_init_points:
                break
    return found


def numeric_ci_check(
    prob: Problem,
    budget: Optional[SampleBudget] = None,
    rng: Optional[random.Random] = None,
) -> CIOutcome:
    """Hunt for a trajectory that stays inside the domain but leaves the
    candidate; reports the first offending sample time.

    The candidate must be closed (instantiate templates first). A point
    counts as inside with tolerance leniency and as outside only beyond
    the tolerance, so borderline numerics cannot fabricate a violation.
    """
    if prob.is_parametric:
        raise ValueError("instantiate the candidate before numeric checking")
    budget = budget or SampleBudget()
    rng = rng or random.Random(0)
    inits = sample_init_points(prob, budget, rng)
    if not inits:
        return CIOutcome(
            "cannot-sample",
            detail="no rational initial points found within the sampling budget",
        )
    in_domain = compile_formula(prob.domain, prob.vars, slack=budget.tolerance)
    in_candidate_lenient = compile_formula(
        prob.candidate, prob.vars, slack=budget.tolerance
    )
    for point in inits:
        x0 = tuple(float(point[v]) for v in prob.vars)
        traj = integrate(prob.field, x0, budget)
        for t, state in zip(traj.times, traj.states):
            if not in_domain(state):
                break  # domain left first: nothing to require afterwards
            if not in_candidate_lenient(state):
                return CIOutcome(
                    "violation",
                    x0=x0,
                    t=t,
                    detail="trajectory remained in the domain but left the candidate",
                    points_tried=len(inits),
                )
    return CIOutcome("no-violation", points_tried=len(inits))


# -- sign probes --------------------------------------------------------------


@dataclass
class ProbeOutcome:
    kind: str  # agree | disagree | excluded
    rank: Optional[int]  # None = infinite
    value: float = 0.0
    probes: List[float] = field(default_factory=list)
    detail: str = ""


def sign_probe(
    p: Polynomial,
    f: VectorField,
    x0: Mapping[str, Fraction],
    bound: int,
    step: float = 1e-3,
    probes: int = 10,
    noise_floor: float = 1e-9,
) -> ProbeOutcome:
    """Compare the predicted immediate sign of p along the trajectory with
    observed values at t = step .. probes*step.

    Probes inside the noise floor are ignored for finite ranks; if every
    probe is inside the floor the case is excluded rather than judged.
    """
    rank, value = lie_rank_at(p, f, x0, bound)
    budget = SampleBudget(
        n_init_points=1, horizon=probes * step, step=step, tolerance=noise_floor
    )
    x0_floats = tuple(float(x0[v]) for v in f.vars)
    traj = integrate(f, x0_floats, budget)
    p_fn = compile_poly(p, f.vars)
    observed = [p_fn(*state) for state in traj.states[1:]]
    if traj.diverged or len(observed) < probes:
        return ProbeOutcome("excluded", rank.index, detail="trajectory diverged")
    if not rank.is_finite:
        if all(abs(v) <= noise_floor for v in observed):
            return ProbeOutcome("agree", None, probes=observed)
        return ProbeOutcome(
            "disagree",
            None,
            probes=observed,
            detail="chain vanishes symbolically but the probe leaves the noise floor",
        )
    meaningful = [v for v in observed if abs(v) > noise_floor]
    if not meaningful:
        return ProbeOutcome(
            "excluded",
            rank.index,
            float(value),
            observed,
            detail="all probes inside the noise floor",
        )
    want_positive = value > 0
    if all((v > 0) == want_positive for v in meaningful):
        return ProbeOutcome("agree", rank.index, float(value), observed)
    return ProbeOutcome(
        "disagree",
        rank.index,
        float(value),
        observed,
        detail="observed sign differs from the first nonzero Lie derivative",
    )
