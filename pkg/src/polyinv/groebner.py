"""Buchberger's algorithm, ideal membership, and Lie-chain rank bounds.

The rank bound is the engine behind every formula this package emits: it
finds the first order at which the next Lie derivative falls into the
ideal generated by the chain so far, which caps the pointwise rank of
the polynomial uniformly over all states (and, for templates, uniformly
over all parameter values).
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .poly import ContextMismatch, ParametricPolynomial, Polynomial, VectorField, lie_chain

DEFAULT_CAP = 20


class FixedPointNotReached(RuntimeError):
    """The Lie-chain ideal did not stabilize within the configured cap."""

    def __init__(self, cap: int):
        super().__init__(
            f"Lie-derivative ideal chain did not reach a fixed point within cap={cap}"
        )
        self.cap = cap


@dataclass(frozen=True)
class MonomialOrder:
    """Total order on monomials: graded reverse lex (default), lex, or graded lex.

    ``precedence`` is the variable significance list; it must be a
    permutation of the context of every polynomial the order is applied to.
    """

    kind: str
    precedence: tuple

    KINDS = ("grevlex", "lex", "grlex")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown monomial order {self.kind!r}")

    @staticmethod
    def grevlex(vars: Sequence[str]) -> "MonomialOrder":
        return MonomialOrder("grevlex", tuple(vars))

    @staticmethod
    def lex(vars: Sequence[str]) -> "MonomialOrder":
        return MonomialOrder("lex", tuple(vars))

    @staticmethod
    def grlex(vars: Sequence[str]) -> "MonomialOrder":
        return MonomialOrder("grlex", tuple(vars))

    def _permutation(self, vars: tuple) -> Optional[tuple]:
        if self.precedence == vars:
            return None
        if set(self.precedence) != set(vars):
            raise ContextMismatch(
                f"order precedence {self.precedence} does not match context {vars}"
            )
        return tuple(vars.index(v) for v in self.precedence)

    def key_fn(self, vars: tuple):
        """Sort key on exponent tuples aligned with ``vars``; bigger = greater."""
        perm = self._permutation(vars)

        def arrange(exps):
            return exps if perm is None else tuple(exps[i] for i in perm)

        if self.kind == "lex":
            return arrange
        if self.kind == "grlex":
            return lambda exps: (sum(exps), arrange(exps))
        return lambda exps: (
            sum(exps),
            tuple(-e for e in reversed(arrange(exps))),
        )


def leading_term(p: Polynomial, order: MonomialOrder) -> Tuple[tuple, Fraction]:
    if p.is_zero():
        raise ValueError("zero polynomial has no leading term")
    key = order.key_fn(p.vars)
    exps = max(p.terms, key=key)
    return exps, p.terms[exps]


def _divides(e1: tuple, e2: tuple) -> bool:
    return all(a <= b for a, b in zip(e1, e2))


def _sub(e1: tuple, e2: tuple) -> tuple:
    return tuple(a - b for a, b in zip(e1, e2))


def _lcm(e1: tuple, e2: tuple) -> tuple:
    return tuple(max(a, b) for a, b in zip(e1, e2))


def _mono_times(p: Polynomial, exps: tuple, coeff: Fraction) -> Polynomial:
    return Polynomial(
        p.vars,
        {tuple(a + b for a, b in zip(e, exps)): c * coeff for e, c in p.terms.items()},
    )


def normal_form(
    p: Polynomial, basis: Sequence[Polynomial], order: MonomialOrder
) -> Polynomial:
    """Remainder of multivariate division of p by the basis.

    No term of the remainder is divisible by any basis leading term, and
    p minus the remainder lies in the ideal of the basis. Deterministic:
    the first basis element (in list order) whose leading term divides is
    always chosen.
    """
    for g in basis:
        if g.is_zero():
            raise ValueError("zero polynomial in division basis")
        if g.vars != p.vars:
            raise ContextMismatch("division basis context differs from dividend")
    lts = [leading_term(g, order) for g in basis]
    key = order.key_fn(p.vars) if not p.is_zero() else None
    remainder: dict = {}
    work = dict(p.terms)
    while work:
        exps = max(work, key=key)
        coeff = work.pop(exps)
        for g, (ge, gc) in zip(basis, lts):
            if _divides(ge, exps):
                factor = coeff / gc
                shift = _sub(exps, ge)
                for e2, c2 in g.terms.items():
                    e = tuple(a + b for a, b in zip(e2, shift))
                    if e == exps:
                        continue
                    c = work.get(e, Fraction(0)) - c2 * factor
                    if c == 0:
                        work.pop(e, None)
                    else:
                        work[e] = c
                break
        else:
            remainder[exps] = coeff
    return Polynomial(p.vars, remainder)


def s_polynomial(f: Polynomial, g: Polynomial, order: MonomialOrder) -> Polynomial:
    (fe, fc), (ge, gc) = leading_term(f, order), leading_term(g, order)
    lcm = _lcm(fe, ge)
    return _mono_times(f, _sub(lcm, fe), 1 / fc) - _mono_times(g, _sub(lcm, ge), 1 / gc)


@dataclass(frozen=True)
class GroebnerBasis:
    """Reduced Groebner basis; empty generator tuple marks the zero ideal."""

    generators: tuple
    order: MonomialOrder

    @property
    def is_zero_ideal(self) -> bool:
        return not self.generators

    def reduce(self, p: Polynomial) -> Polynomial:
        if self.is_zero_ideal:
            return p
        return normal_form(p, self.generators, self.order)

    def contains(self, p: Polynomial) -> bool:
        return self.reduce(p).is_zero()


# Active recorders collect every basis computed while they are open; the
# acceptance suite uses this to re-verify the Buchberger criterion on all
# bases a scenario produced.
_recorders: List[list] = []
_recorder_lock = threading.Lock()


@contextmanager
def record_bases():
    log: list = []
    with _recorder_lock:
        _recorders.append(log)
    try:
        yield log
    finally:
        with _recorder_lock:
            _recorders.remove(log)


def _record(gens: tuple, basis: GroebnerBasis) -> None:
    with _recorder_lock:
        for log in _recorders:
            log.append((gens, basis))


def buchberger(
    gens: Iterable[Polynomial], order: Optional[MonomialOrder] = None
) -> GroebnerBasis:
    """Reduced Groebner basis of the ideal generated by ``gens``.

    Pairs are pruned with the coprime-leading-term criterion and the
    chain criterion; the result is interreduced and monic.
    """
    gen_list = [g for g in gens if not g.is_zero()]
    if not gen_list:
        basis = GroebnerBasis((), order or MonomialOrder.grevlex(()))
        _record((), basis)
        return basis
    vars = gen_list[0].vars
    for g in gen_list:
        if g.vars != vars:
            raise ContextMismatch("generators must share one variable context")
    if order is None:
        order = MonomialOrder.grevlex(vars)

    G: List[Polynomial] = []
    lts: List[tuple] = []

    def add(p: Polynomial) -> None:
        e, c = leading_term(p, order)
        G.append(p * (1 / c))
        lts.append(e)

    for g in gen_list:
        add(g)

    pairs = {(i, j) for i in range(len(G)) for j in range(i + 1, len(G))}
    done = set()
    key = order.key_fn(vars)
    while pairs:
        i, j = min(pairs, key=lambda ij: key(_lcm(lts[ij[0]], lts[ij[1]])))
        pairs.discard((i, j))
        done.add((i, j))
        lcm = _lcm(lts[i], lts[j])
        # coprime criterion: S-poly reduces to 0 when leading terms are coprime
        if lcm == tuple(a + b for a, b in zip(lts[i], lts[j])):
            continue
        # chain criterion: some k with LT(k) | lcm and both cross pairs handled
        skip = False
        for k in range(len(G)):
            if k in (i, j) or not _divides(lts[k], lcm):
                continue
            ik = (min(i, k), max(i, k))
            jk = (min(j, k), max(j, k))
            if ik in done and jk in done:
                skip = True
                break
        if skip:
            continue
        r = normal_form(s_polynomial(G[i], G[j], order), G, order)
        if not r.is_zero():
            new = len(G)
            add(r)
            pairs.update((m, new) for m in range(new))

    # minimalize: drop generators whose leading term another divides
    minimal: List[int] = []
    for i in range(len(G)):
        if not any(
            j != i and _divides(lts[j], lts[i]) and (j in minimal or j > i)
            for j in range(len(G))
        ):
            minimal.append(i)
    kept = [G[i] for i in minimal]
    # interreduce to the unique reduced basis
    reduced = []
    for i, g in enumerate(kept):
        rest = kept[:i] + kept[i + 1:]
        r = normal_form(g, rest, order) if rest else g
        if not r.is_zero():
            e, c = leading_term(r, order)
            reduced.append(r * (1 / c))
    reduced.sort(key=lambda p: key(leading_term(p, order)[0]))
    basis = GroebnerBasis(tuple(reduced), order)
    _record(tuple(gen_list), basis)
    return basis


def ideal_member(
    p: Polynomial,
    gens: Sequence[Polynomial],
    order: Optional[MonomialOrder] = None,
) -> bool:
    """True iff p lies in the ideal generated by ``gens``."""
    return buchberger(gens, order).contains(p)


def basis_self_check(gens: Sequence[Polynomial], basis: GroebnerBasis) -> bool:
    """Buchberger criterion plus containment of the original generators."""
    if basis.is_zero_ideal:
        return all(g.is_zero() for g in gens)
    for g in gens:
        if not basis.contains(g):
            return False
    G = basis.generators
    for i in range(len(G)):
        for j in range(i + 1, len(G)):
            s = s_polynomial(G[i], G[j], basis.order)
            if not normal_form(s, G, basis.order).is_zero():
                return False
    return True


@dataclass(frozen=True)
class RankBound:
    """Uniform bound on the pointwise rank, with its witnessing Lie chain.

    ``chain`` holds L^0..L^(value+1); the last element is a member of the
    ideal of the earlier ones, so no Lie derivative beyond ``value`` can
    be the first nonzero one anywhere.
    """

    value: int
    chain: tuple

    def __post_init__(self):
        if len(self.chain) != self.value + 2:
            raise ValueError("chain must hold L^0..L^(N+1)")


def rank_bound(
    p: Polynomial,
    f: VectorField,
    cap: int = DEFAULT_CAP,
    order: Optional[MonomialOrder] = None,
) -> RankBound:
    """Least i <= cap with L^(i+1) p in the ideal of L^0..L^i p."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    for i in range(cap + 1):
        chain = lie_chain(p, f, i + 1)
        gens = [q for q in chain[:-1] if not q.is_zero()]
        if not gens:
            # zero ideal: membership means the next derivative is zero too
            if chain[-1].is_zero():
                return RankBound(i, tuple(chain))
            continue
        if ideal_member(chain[-1], gens, order):
            return RankBound(i, tuple(chain))
    raise FixedPointNotReached(cap)


def parametric_rank_bound(
    p: ParametricPolynomial,
    f: VectorField,
    cap: int = DEFAULT_CAP,
    order: Optional[MonomialOrder] = None,
) -> RankBound:
    """Rank bound for a template, uniform over all parameter values.

    The parameters are adjoined to the ring as ordinary variables
    (ordered after the state variables by the template's own context),
    so the fixed point found here bounds the rank of every instantiation.
    """
    for u in p.params:
        if u in f.vars:
            raise ValueError(f"parameter {u!r} also appears in the vector field")
    return rank_bound(p.poly, f, cap, order)
