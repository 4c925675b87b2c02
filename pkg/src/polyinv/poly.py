"""Exact multivariate polynomial arithmetic, gradients, and Lie derivatives.

Coefficients are arbitrary-precision rationals (``fractions.Fraction``);
no floating point enters any symbolic path. Polynomials are immutable and
hashable, so they can be shared freely across threads and used as cache
keys for memoized Lie chains.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence, Union

Exponents = tuple  # exponent tuple aligned with Polynomial.vars
Scalar = Union[int, Fraction]


class ContextMismatch(ValueError):
    """Two polynomials over different variable contexts were combined."""


class Polynomial:
    """Sparse polynomial over an ordered variable context.

    ``terms`` maps exponent tuples (one entry per context variable) to
    nonzero rational coefficients. The representation is canonical: no
    zero coefficients are stored, and two polynomials are equal iff their
    contexts and term maps are equal. The zero polynomial has an empty
    term map.
    """

    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, vars: Sequence[str], terms: Mapping[Exponents, Scalar]):
        vs = tuple(vars)
        clean = {}
        for exps, coeff in terms.items():
            c = Fraction(coeff)
            if c == 0:
                continue
            e = tuple(exps)
            if len(e) != len(vs):
                raise ValueError(f"exponent tuple {e} does not match context {vs}")
            clean[e] = clean.get(e, Fraction(0)) + c
        object.__setattr__(self, "vars", vs)
        object.__setattr__(self, "terms", {e: c for e, c in clean.items() if c != 0})
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(vars: Sequence[str]) -> "Polynomial":
        return Polynomial(vars, {})

    @staticmethod
    def constant(vars: Sequence[str], value: Scalar) -> "Polynomial":
        return Polynomial(vars, {(0,) * len(tuple(vars)): Fraction(value)})

    @staticmethod
    def variable(vars: Sequence[str], name: str) -> "Polynomial":
        vs = tuple(vars)
        if name not in vs:
            raise ValueError(f"variable {name!r} not in context {vs}")
        exps = tuple(1 if v == name else 0 for v in vs)
        return Polynomial(vs, {exps: Fraction(1)})

    # -- structure ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> Fraction:
        """Value of a constant polynomial (0 for the zero polynomial)."""
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return next(iter(self.terms.values()), Fraction(0))

    def total_degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def occurring_vars(self) -> frozenset:
        return frozenset(
            v for i, v in enumerate(self.vars) if any(e[i] for e in self.terms)
        )

    def coefficient(self, exps: Exponents) -> Fraction:
        return self.terms.get(tuple(exps), Fraction(0))

    def _require_same_context(self, other: "Polynomial") -> None:
        if self.vars != other.vars:
            raise ContextMismatch(
                f"contexts differ: {self.vars} vs {other.vars}"
            )

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.vars, other)
        self._require_same_context(other)
        merged = dict(self.terms)
        for e, c in other.terms.items():
            merged[e] = merged.get(e, Fraction(0)) + c
        return Polynomial(self.vars, merged)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.vars, other)
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            return Polynomial(self.vars, {e: k * c for e, k in self.terms.items()})
        self._require_same_context(other)
        prod: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                prod[e] = prod.get(e, Fraction(0)) + c1 * c2
        return Polynomial(self.vars, prod)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(self.vars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __truediv__(self, scalar: Scalar) -> "Polynomial":
        c = Fraction(scalar)
        if c == 0:
            raise ZeroDivisionError("division of polynomial by zero")
        return self * (1 / c)

    # -- evaluation and substitution -----------------------------------

    def evaluate(self, point: Mapping[str, Scalar]) -> Fraction:
        """Exact value at a rational point.

        Every variable occurring in the polynomial must be assigned.
        """
        idx = []
        for i, v in enumerate(self.vars):
            if any(e[i] for e in self.terms):
                if v not in point:
                    raise KeyError(f"missing assignment for variable {v!r}")
                idx.append((i, Fraction(point[v])))
        total = Fraction(0)
        for exps, coeff in self.terms.items():
            val = coeff
            for i, x in idx:
                if exps[i]:
                    val *= x ** exps[i]
            total += val
        return total

    def substitute_values(self, assignment: Mapping[str, Scalar]) -> "Polynomial":
        """Substitute rationals for some variables, dropping them from the context."""
        drop = {v: Fraction(c) for v, c in assignment.items() if v in self.vars}
        keep = tuple(v for v in self.vars if v not in drop)
        keep_idx = [i for i, v in enumerate(self.vars) if v not in drop]
        out: dict = {}
        for exps, coeff in self.terms.items():
            c = coeff
            for i, v in enumerate(self.vars):
                if v in drop and exps[i]:
                    c *= drop[v] ** exps[i]
            e = tuple(exps[i] for i in keep_idx)
            out[e] = out.get(e, Fraction(0)) + c
        return Polynomial(keep, out)

    def with_vars(self, vars: Sequence[str]) -> "Polynomial":
        """Reinterpret over a context containing all current variables."""
        vs = tuple(vars)
        if vs == self.vars:
            return self
        pos = {}
        for v in self.vars:
            if v not in vs:
                raise ValueError(f"variable {v!r} absent from new context {vs}")
            pos[v] = vs.index(v)
        out = {}
        for exps, coeff in self.terms.items():
            e = [0] * len(vs)
            for i, v in enumerate(self.vars):
                e[pos[v]] = exps[i]
            out[tuple(e)] = coeff
        return Polynomial(vs, out)

    def diff(self, var: str) -> "Polynomial":
        """Partial derivative with respect to one context variable."""
        if var not in self.vars:
            raise ValueError(f"variable {var!r} not in context {self.vars}")
        i = self.vars.index(var)
        out = {}
        for exps, coeff in self.terms.items():
            k = exps[i]
            if k == 0:
                continue
            e = exps[:i] + (k - 1,) + exps[i + 1:]
            out[e] = out.get(e, Fraction(0)) + coeff * k
        return Polynomial(self.vars, out)

    # -- identity -------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((self.vars, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        return f"Polynomial({self})"

    def __str__(self) -> str:
        return format_poly(self)

    def sorted_terms(self):
        """Terms ordered for display: degree-descending, then lex on exponents."""
        return sorted(
            self.terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True
        )


def format_poly(p: Polynomial) -> str:
    """Render in the problem-file grammar (re-parseable)."""
    if p.is_zero():
        return "0"
    parts = []
    for exps, coeff in p.sorted_terms():
        factors = []
        for v, e in zip(p.vars, exps):
            if e == 1:
                factors.append(v)
            elif e > 1:
                factors.append(f"{v}^{e}")
        mag = abs(coeff)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([str(mag)] + factors)
        if not parts:
            parts.append(body if coeff > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if coeff > 0 else f"- {body}")
    return " ".join(parts)


@dataclass(frozen=True)
class VectorField:
    """Right-hand side of x' = f(x): one polynomial per state variable."""

    vars: tuple
    components: tuple

    def __post_init__(self):
        if len(self.vars) != len(self.components):
            raise ValueError(
                f"{len(self.vars)} variables but {len(self.components)} components"
            )
        for c in self.components:
            if c.vars != self.vars:
                raise ContextMismatch(
                    f"field component context {c.vars} != state {self.vars}"
                )

    @staticmethod
    def of(vars: Sequence[str], components: Iterable[Polynomial]) -> "VectorField":
        return VectorField(tuple(vars), tuple(components))

    def negated(self) -> "VectorField":
        """The time-reversed field -f."""
        return VectorField(self.vars, tuple(-c for c in self.components))

    def __str__(self) -> str:
        return "; ".join(
            f"{v}' = {format_poly(c)}" for v, c in zip(self.vars, self.components)
        )


def gradient(p: Polynomial, wrt: Optional[Sequence[str]] = None):
    """Vector of partial derivatives, one per differentiation variable.

    ``wrt`` defaults to the full context; pass the state variables to
    leave template parameters undifferentiated.
    """
    names = tuple(wrt) if wrt is not None else p.vars
    return [p.diff(v) for v in names]


def lie_derivative(p: Polynomial, f: VectorField) -> Polynomial:
    """Inner product of the gradient of p (in the state variables) with f."""
    for v in f.vars:
        if v not in p.vars:
            raise ContextMismatch(
                f"field variable {v!r} missing from polynomial context {p.vars}"
            )
    out = Polynomial.zero(p.vars)
    for v, comp in zip(f.vars, f.components):
        out = out + p.diff(v) * comp.with_vars(p.vars)
    return out


@lru_cache(maxsize=None)
def _lie_term(p: Polynomial, f: VectorField, k: int) -> Polynomial:
    if k == 0:
        return p
    return lie_derivative(_lie_term(p, f, k - 1), f)


def lie_chain(p: Polynomial, f: VectorField, k: int):
    """[L^0 p, ..., L^k p]; memoized per (p, f) so shared prefixes are reused."""
    if k < 0:
        raise ValueError("chain order must be nonnegative")
    return [_lie_term(p, f, i) for i in range(k + 1)]


@dataclass(frozen=True)
class RankValue:
    """Index of the first nonvanishing Lie derivative at a point; None = never."""

    index: Optional[int]

    @staticmethod
    def finite(k: int) -> "RankValue":
        return RankValue(k)

    @property
    def is_finite(self) -> bool:
        return self.index is not None

    def __str__(self) -> str:
        return "inf" if self.index is None else str(self.index)


RANK_INFINITE = RankValue(None)


def lie_rank_at(
    p: Polynomial, f: VectorField, point: Mapping[str, Scalar], bound: int
):
    """First k <= bound with L^k p nonzero at the point, and that value.

    Returns (RankValue, value); (infinite, 0) when the whole chain up to
    the bound vanishes, which by the uniform rank bound means every
    higher derivative vanishes there too.
    """
    for k, q in enumerate(lie_chain(p, f, bound)):
        val = q.evaluate(point)
        if val != 0:
            return RankValue.finite(k), val
    return RANK_INFINITE, Fraction(0)


@dataclass(frozen=True)
class ParametricPolynomial:
    """Polynomial template over state variables plus coefficient parameters."""

    poly: Polynomial
    params: tuple

    def __post_init__(self):
        for u in self.params:
            if u not in self.poly.vars:
                raise ValueError(f"parameter {u!r} not in context {self.poly.vars}")

    @property
    def state_vars(self) -> tuple:
        return tuple(v for v in self.poly.vars if v not in self.params)

    def instantiate(self, values: Mapping[str, Scalar]) -> Polynomial:
        """Substitute rationals for every parameter; result is over x only."""
        missing = [u for u in self.params if u not in values]
        if missing:
            raise KeyError(f"missing parameter value(s): {missing}")
        return self.poly.substitute_values({u: values[u] for u in self.params})

    def __str__(self) -> str:
        return format_poly(self.poly)
