"""Semi-algebraic formulas and the Lie-derivative encodings of flow behavior.

A semi-algebraic set is described by a boolean combination of polynomial
sign conditions. For an atom ``p >= 0`` or ``p > 0`` and a polynomial
vector field, the local behavior of trajectories crossing the boundary
is fully determined by the first nonvanishing Lie derivative of p, and a
uniform rank bound makes that condition a finite formula. This module
builds those formulas:

- ``first_sign_neg``: the first nonzero Lie derivative is negative, so
  the forward trajectory immediately makes p negative (immediate exit
  from {p >= 0}).
- ``first_sign_pos``: it is positive, so the forward trajectory
  immediately enters {p > 0}.
- ``all_derivs_zero``: the whole chain vanishes, so p is identically
  zero along the local trajectory.
- reverse-time variants obtained by the sign twist (-1)^i, equivalent to
  running the cascade along the negated field.

On top of the atom encodings sit the set-level encodings (a union of
intersections distributes over both) and the three-part invariance
condition: the initial set lies in the candidate, no forward exit can
happen while the domain flow continues, and no backward re-entry exists
for points of the domain outside the candidate. Validity of the
conjunction is equivalent to the candidate being a continuous invariant.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from .groebner import RankBound, parametric_rank_bound, rank_bound
from .poly import (
    ParametricPolynomial,
    Polynomial,
    VectorField,
    format_poly,
)


class Rel(enum.Enum):
    GE = ">="
    GT = ">"
    LE = "<="
    LT = "<"
    EQ = "="
    NE = "!="

    def holds(self, value: Fraction) -> bool:
        if self is Rel.GE:
            return value >= 0
        if self is Rel.GT:
            return value > 0
        if self is Rel.LE:
            return value <= 0
        if self is Rel.LT:
            return value < 0
        if self is Rel.EQ:
            return value == 0
        return value != 0


@dataclass(frozen=True)
class Atom:
    poly: Polynomial
    rel: Rel

    def __str__(self) -> str:
        return f"{format_poly(self.poly)} {self.rel.value} 0"


@dataclass(frozen=True)
class TrueF:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __str__(self) -> str:
        return "false"


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class And:
    args: tuple

    def __str__(self) -> str:
        return " & ".join(_wrap(a, (Or, Implies)) for a in self.args)


@dataclass(frozen=True)
class Or:
    args: tuple

    def __str__(self) -> str:
        return " | ".join(_wrap(a, (Implies,)) for a in self.args)


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self) -> str:
        return f"!{_wrap(self.arg, (Atom, And, Or, Implies))}"


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.lhs, (Implies,))} -> {self.rhs}"


Formula = Union[Atom, TrueF, FalseF, And, Or, Not, Implies]


def _wrap(f: Formula, tight: tuple) -> str:
    s = str(f)
    return f"({s})" if isinstance(f, tight) else s


def atom(p: Polynomial, rel: Rel) -> Formula:
    """Atomic sign condition; constant polynomials fold to true/false."""
    if p.is_constant():
        return TRUE if rel.holds(p.constant_value()) else FALSE
    return Atom(p, rel)


def conj(*args: Formula) -> Formula:
    flat: List[Formula] = []
    for a in args:
        if isinstance(a, FalseF):
            return FALSE
        if isinstance(a, TrueF):
            continue
        items = a.args if isinstance(a, And) else (a,)
        for item in items:
            if item not in flat:
                flat.append(item)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*args: Formula) -> Formula:
    flat: List[Formula] = []
    for a in args:
        if isinstance(a, TrueF):
            return TRUE
        if isinstance(a, FalseF):
            continue
        items = a.args if isinstance(a, Or) else (a,)
        for item in items:
            if item not in flat:
                flat.append(item)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def negation(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    return Not(f)


def implies(lhs: Formula, rhs: Formula) -> Formula:
    if isinstance(lhs, FalseF) or isinstance(rhs, TrueF):
        return TRUE
    if isinstance(lhs, TrueF):
        return rhs
    return Implies(lhs, rhs)


def evaluate(f: Formula, point: Mapping[str, Fraction]) -> bool:
    """Exact truth value at a rational point."""
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Atom):
        return f.rel.holds(f.poly.evaluate(point))
    if isinstance(f, And):
        return all(evaluate(a, point) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, point) for a in f.args)
    if isinstance(f, Not):
        return not evaluate(f.arg, point)
    if isinstance(f, Implies):
        return (not evaluate(f.lhs, point)) or evaluate(f.rhs, point)
    raise TypeError(f"not a formula: {f!r}")


def substitute(f: Formula, values: Mapping[str, Fraction]) -> Formula:
    """Substitute rationals for variables in every atom (e.g. instantiate u)."""
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return atom(f.poly.substitute_values(values), f.rel)
    if isinstance(f, And):
        return conj(*(substitute(a, values) for a in f.args))
    if isinstance(f, Or):
        return disj(*(substitute(a, values) for a in f.args))
    if isinstance(f, Not):
        return negation(substitute(f.arg, values))
    if isinstance(f, Implies):
        return implies(substitute(f.lhs, values), substitute(f.rhs, values))
    raise TypeError(f"not a formula: {f!r}")


def formula_vars(f: Formula) -> frozenset:
    if isinstance(f, Atom):
        return f.poly.occurring_vars()
    if isinstance(f, (TrueF, FalseF)):
        return frozenset()
    if isinstance(f, Not):
        return formula_vars(f.arg)
    if isinstance(f, Implies):
        return formula_vars(f.lhs) | formula_vars(f.rhs)
    return frozenset().union(*(formula_vars(a) for a in f.args))


def iter_atoms(f: Formula):
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from iter_atoms(f.arg)
    elif isinstance(f, Implies):
        yield from iter_atoms(f.lhs)
        yield from iter_atoms(f.rhs)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from iter_atoms(a)


# -- disjunctive normal form -------------------------------------------

SignedAtom = Tuple[Polynomial, Rel]  # Rel restricted to GE / GT


@dataclass(frozen=True)
class DNFForm:
    """Union of intersections of {>=, >} sign conditions.

    The empty disjunction is false; a disjunct with no atoms is true
    (the whole space, e.g. an omitted domain).
    """

    disjuncts: tuple  # tuple of tuples of SignedAtom

    @property
    def is_true(self) -> bool:
        return any(len(c) == 0 for c in self.disjuncts)

    @property
    def is_false(self) -> bool:
        return not self.disjuncts

    def as_formula(self) -> Formula:
        if self.is_false:
            return FALSE
        return disj(
            *(conj(*(atom(p, rel) for p, rel in c)) for c in self.disjuncts)
        )

    def evaluate(self, point: Mapping[str, Fraction]) -> bool:
        return any(
            all(rel.holds(p.evaluate(point)) for p, rel in c)
            for c in self.disjuncts
        )


def _atom_to_dnf(p: Polynomial, rel: Rel, positive: bool) -> List[List[SignedAtom]]:
    """Normalized disjuncts of one atom (or its negation) using only >=, >."""
    if not positive:
        flipped = {
            Rel.GE: (Rel.GT, True),   # !(p >= 0)  ->  -p > 0
            Rel.GT: (Rel.GE, True),   # !(p > 0)   ->  -p >= 0
            Rel.LE: (Rel.GT, False),  # !(p <= 0)  ->   p > 0
            Rel.LT: (Rel.GE, False),  # !(p < 0)   ->   p >= 0
        }
        if rel in flipped:
            new_rel, negate = flipped[rel]
            return _atom_to_dnf(-p if negate else p, new_rel, True)
        if rel is Rel.EQ:
            return _atom_to_dnf(p, Rel.NE, True)
        return _atom_to_dnf(p, Rel.EQ, True)
    if rel is Rel.GE:
        return [[(p, Rel.GE)]]
    if rel is Rel.GT:
        return [[(p, Rel.GT)]]
    if rel is Rel.LE:
        return [[(-p, Rel.GE)]]
    if rel is Rel.LT:
        return [[(-p, Rel.GT)]]
    if rel is Rel.EQ:
        return [[(p, Rel.GE), (-p, Rel.GE)]]
    return [[(p, Rel.GT)], [(-p, Rel.GT)]]  # p != 0


def _dnf(f: Formula, positive: bool) -> List[List[SignedAtom]]:
    if isinstance(f, TrueF):
        return [[]] if positive else []
    if isinstance(f, FalseF):
        return [] if positive else [[]]
    if isinstance(f, Atom):
        return _atom_to_dnf(f.poly, f.rel, positive)
    if isinstance(f, Not):
        return _dnf(f.arg, not positive)
    if isinstance(f, Implies):
        return _dnf(disj(negation(f.lhs), f.rhs), positive)
    args = f.args
    want_product = (isinstance(f, And) and positive) or (
        isinstance(f, Or) and not positive
    )
    parts = [_dnf(a, positive) for a in args]
    if not want_product:
        out: List[List[SignedAtom]] = []
        for part in parts:
            out.extend(part)
        return out
    # distribute intersection over the union parts
    acc: List[List[SignedAtom]] = [[]]
    for part in parts:
        acc = [c1 + c2 for c1 in acc for c2 in part]
    return acc


def normalize_dnf(f: Formula) -> DNFForm:
    """Equivalent union-of-intersections form over {>=, >} atoms only."""
    raw = _dnf(f, True)
    disjuncts: List[tuple] = []
    for conj_atoms in raw:
        cleaned: List[SignedAtom] = []
        contradictory = False
        for p, rel in conj_atoms:
            if p.is_constant():
                if rel.holds(p.constant_value()):
                    continue
                contradictory = True
                break
            if (p, rel) not in cleaned:
                cleaned.append((p, rel))
        if contradictory:
            continue
        key = tuple(cleaned)
        if key not in disjuncts:
            disjuncts.append(key)
    return DNFForm(tuple(disjuncts))


# -- problems ------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """A polynomial vector field with domain, initial set, and candidate.

    ``candidate`` may mention the declared parameters, in which case the
    problem is a generation problem (solve for parameter values) until it
    is instantiated. The containment of the initial set in the domain is
    an assumption of the model and is checkable, not enforced.
    """

    vars: tuple
    params: tuple
    field: VectorField
    domain: Formula
    init: Formula
    candidate: Formula
    source: str = ""

    @property
    def is_parametric(self) -> bool:
        return bool(self.params) and bool(
            formula_vars(self.candidate) & set(self.params)
        )

    @property
    def all_vars(self) -> tuple:
        return self.vars + self.params

    def instantiated(self, values: Mapping[str, Fraction]) -> "Problem":
        missing = [u for u in self.params if u not in values]
        if missing:
            raise KeyError(f"missing parameter value(s): {missing}")
        sub = {u: Fraction(values[u]) for u in self.params}
        return Problem(
            vars=self.vars,
            params=(),
            field=self.field,
            domain=substitute(self.domain, sub),
            init=substitute(self.init, sub),
            candidate=substitute(self.candidate, sub),
            source=self.source,
        )


# -- rank bounds per atom -------------------------------------------------


class RankBoundCache:
    """Rank bounds computed once per distinct atom polynomial.

    Parametric atoms get the parameter-uniform bound, so one bound (and
    one formula skeleton) serves every instantiation of a template.
    """

    def __init__(self, fld: VectorField, params: Sequence[str] = (), cap: int = 20):
        self.field = fld
        self.params = tuple(params)
        self.cap = cap
        self._memo: Dict[Polynomial, RankBound] = {}
        self._lock = threading.Lock()

    def bound(self, p: Polynomial) -> RankBound:
        with self._lock:
            cached = self._memo.get(p)
        if cached is not None:
            return cached
        used_params = tuple(u for u in self.params if u in p.occurring_vars())
        if used_params:
            rb = parametric_rank_bound(
                ParametricPolynomial(p, used_params), self.field, self.cap
            )
        else:
            rb = rank_bound(p, self.field, self.cap)
        with self._lock:
            self._memo[p] = rb
        return rb

    def known_bounds(self):
        with self._lock:
            return dict(self._memo)


# -- Lie-chain sign cascades ----------------------------------------------


def _cascade(chain: Sequence[Polynomial], rel: Rel, alternate: bool) -> Formula:
    """Or over i of (earlier derivatives vanish) and (i-th satisfies rel).

    With ``alternate`` the i-th derivative is sign-twisted by (-1)^i,
    which is the same cascade along the time-reversed field.
    """
    disjuncts = []
    for i, q in enumerate(chain):
        eqs = [atom(chain[j], Rel.EQ) for j in range(i)]
        lead = -q if alternate and i % 2 == 1 else q
        disjuncts.append(conj(*eqs, atom(lead, rel)))
    return disj(*disjuncts)


def first_sign_neg(p: Polynomial, rb: RankBound) -> Formula:
    """The first nonzero Lie derivative of p is negative (immediate exit
    from {p >= 0}); false wherever the rank is infinite."""
    return _cascade(rb.chain[: rb.value + 1], Rel.LT, alternate=False)


def first_sign_pos(p: Polynomial, rb: RankBound, reverse_time: bool = False) -> Formula:
    """The first nonzero Lie derivative is positive: the forward (or, with
    ``reverse_time``, backward) trajectory immediately enters {p > 0}."""
    return _cascade(rb.chain[: rb.value + 1], Rel.GT, alternate=reverse_time)


def all_derivs_zero(p: Polynomial, rb: RankBound) -> Formula:
    """Every Lie derivative up to the rank bound (hence all of them)
    vanishes: p is identically zero along the local trajectory."""
    return conj(*(atom(q, Rel.EQ) for q in rb.chain[: rb.value + 1]))


def atom_entry_formula(
    p: Polynomial, rel: Rel, cache: RankBoundCache, reverse_time: bool = False
) -> Formula:
    """Points whose (forward or backward) trajectory immediately enters
    the atom's set: {p > 0} needs a positive first sign; {p >= 0} also
    admits the identically-zero case."""
    if rel not in (Rel.GE, Rel.GT):
        raise ValueError(f"entry encoding is defined for >= and > atoms, not {rel}")
    rb = cache.bound(p)
    pos = first_sign_pos(p, rb, reverse_time=reverse_time)
    if rel is Rel.GT:
        return pos
    return disj(pos, all_derivs_zero(p, rb))


def set_entry_formula(
    dnf: DNFForm, cache: RankBoundCache, reverse_time: bool = False
) -> Formula:
    """Entry encoding of a whole union-of-intersections set.

    Entry into a union is entry into some member; entry into an
    intersection is entry into every member. The whole space yields true.
    """
    if dnf.is_false:
        return FALSE
    return disj(
        *(
            conj(
                *(
                    atom_entry_formula(p, rel, cache, reverse_time)
                    for p, rel in c
                )
            )
            for c in dnf.disjuncts
        )
    )


def boundary_exit_criterion(
    h: Polynomial, p: Polynomial, cache: RankBoundCache
) -> Formula:
    """Single-atom criterion: an exit through the boundary of {p >= 0}
    is allowed only where the domain {h >= 0} is exited as well."""
    pi_p = first_sign_neg(p, cache.bound(p))
    pi_h = first_sign_neg(h, cache.bound(h))
    return implies(conj(atom(p, Rel.EQ), pi_p), pi_h)


@dataclass(frozen=True)
class Goal:
    """One universally quantified validity goal of the invariance condition."""

    name: str
    formula: Formula

    def __str__(self) -> str:
        return f"[{self.name}] {self.formula}"


GOAL_INIT = "init-in-candidate"
GOAL_NO_EXIT = "no-forward-exit"
GOAL_NO_REENTRY = "no-backward-reentry"
GOAL_BOUNDARY = "boundary-exit-covered"
GOAL_EQ_DERIVS = "derivatives-vanish-on-zero-set"


def invariance_goals(prob: Problem, cache: RankBoundCache) -> List[Goal]:
    """The three-part invariance condition for a candidate in DNF shape.

    Valid for all states (and a given parameter instantiation) iff the
    candidate is a continuous invariant of the system.
    """
    p_dnf = normalize_dnf(prob.candidate)
    h_dnf = normalize_dnf(prob.domain)
    p_formula = p_dnf.as_formula()
    h_formula = h_dnf.as_formula()
    enter_p = set_entry_formula(p_dnf, cache)
    enter_h = set_entry_formula(h_dnf, cache)
    renter_p = set_entry_formula(p_dnf, cache, reverse_time=True)
    renter_h = set_entry_formula(h_dnf, cache, reverse_time=True)
    return [
        Goal(GOAL_INIT, implies(prob.init, p_formula)),
        Goal(GOAL_NO_EXIT, implies(conj(p_formula, h_formula, enter_h), enter_p)),
        Goal(
            GOAL_NO_REENTRY,
            implies(
                conj(negation(p_formula), h_formula, renter_h),
                negation(renter_p),
            ),
        ),
    ]


def simple_invariance_goals(
    h: Polynomial, p: Polynomial, init: Formula, cache: RankBoundCache
) -> List[Goal]:
    """Specialized goals for a single nonstrict candidate atom and a
    single nonstrict domain atom."""
    return [
        Goal(GOAL_INIT, implies(init, atom(p, Rel.GE))),
        Goal(GOAL_BOUNDARY, boundary_exit_criterion(h, p, cache)),
    ]


def equation_invariance_goals(
    p: Polynomial, init: Formula, cache: RankBoundCache
) -> List[Goal]:
    """Goals for a candidate of the form p = 0 over the whole space:
    the initial states satisfy the equation, and every Lie derivative up
    to the rank bound vanishes on its zero set."""
    rb = cache.bound(p)
    derivs = conj(*(atom(q, Rel.EQ) for q in rb.chain[1 : rb.value + 1]))
    return [
        Goal(GOAL_INIT, implies(init, atom(p, Rel.EQ))),
        Goal(GOAL_EQ_DERIVS, implies(atom(p, Rel.EQ), derivs)),
    ]


def main_condition(prob: Problem, cache: RankBoundCache) -> Formula:
    """Conjunction of the three invariance goals as one matrix (free in
    the parameters when the candidate is a template)."""
    return conj(*(g.formula for g in invariance_goals(prob, cache)))
