"""SMT-LIB 2 script emission and solver-reply parsing.

Scripts are byte-stable for identical inputs: variables are declared in
context order and polynomial terms are emitted in display order.
Rationals appear as exact quotient terms and negatives use unary minus,
so nothing is lost between the exact representation and the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .formulas import And, Atom, FalseF, Formula, Implies, Not, Or, Rel, TrueF
from .poly import Polynomial

VERSION_HEADER = "(set-info :smt-lib-version 2.6)"


def rational_term(q: Fraction) -> str:
    """Exact SMT-LIB real constant: quotient syntax, unary minus."""
    sign = q < 0
    q = -q if sign else q
    body = f"(/ {q.numerator} {q.denominator})" if q.denominator != 1 else str(q.numerator)
    return f"(- {body})" if sign else body


def poly_term(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for exps, coeff in p.sorted_terms():
        factors: List[str] = []
        for v, e in zip(p.vars, exps):
            factors.extend([v] * e)
        if not factors:
            parts.append(rational_term(coeff))
        elif coeff == 1 and len(factors) == 1:
            parts.append(factors[0])
        else:
            items = ([] if coeff == 1 else [rational_term(coeff)]) + factors
            parts.append(f"(* {' '.join(items)})" if len(items) > 1 else items[0])
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


_REL_SMT = {
    Rel.GE: ">=",
    Rel.GT: ">",
    Rel.LE: "<=",
    Rel.LT: "<",
    Rel.EQ: "=",
}


def formula_term(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        p = poly_term(f.poly)
        if f.rel is Rel.NE:
            return f"(not (= {p} 0))"
        return f"({_REL_SMT[f.rel]} {p} 0)"
    if isinstance(f, And):
        return f"(and {' '.join(formula_term(a) for a in f.args)})"
    if isinstance(f, Or):
        return f"(or {' '.join(formula_term(a) for a in f.args)})"
    if isinstance(f, Not):
        return f"(not {formula_term(f.arg)})"
    if isinstance(f, Implies):
        return f"(=> {formula_term(f.lhs)} {formula_term(f.rhs)})"
    raise TypeError(f"not a formula: {f!r}")


def emit_validity_script(
    f: Formula, vars: Sequence[str], logic: str = "QF_NRA"
) -> str:
    """Script whose unsatisfiability certifies validity of the formula.

    Asserts the negation over real constants and requests a model, which
    (when sat) is a falsifying witness.
    """
    lines = [
        VERSION_HEADER,
        f"(set-logic {logic})",
        "(set-option :produce-models true)",
    ]
    lines.extend(f"(declare-const {v} Real)" for v in vars)
    lines.append(f"(assert (not {formula_term(f)}))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def emit_exists_forall_script(
    f: Formula,
    exists_vars: Sequence[str],
    forall_vars: Sequence[str],
    logic: str = "NRA",
) -> str:
    """Script satisfiable iff some parameter values make the formula valid."""
    lines = [
        VERSION_HEADER,
        f"(set-logic {logic})",
        "(set-option :produce-models true)",
    ]
    lines.extend(f"(declare-const {u} Real)" for u in exists_vars)
    bound = " ".join(f"({x} Real)" for x in forall_vars)
    lines.append(f"(assert (forall ({bound}) {formula_term(f)}))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def emit_satisfiability_script(
    f: Formula, vars: Sequence[str], logic: str = "QF_NRA"
) -> str:
    """Script satisfiable iff the formula has a solution (no negation)."""
    lines = [
        VERSION_HEADER,
        f"(set-logic {logic})",
        "(set-option :produce-models true)",
    ]
    lines.extend(f"(declare-const {v} Real)" for v in vars)
    lines.append(f"(assert {formula_term(f)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# -- reply parsing ---------------------------------------------------------


class SExprError(ValueError):
    pass


def _tokenize_sexpr(text: str) -> List[str]:
    tokens: List[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            tokens.append(text[i : j + 1])
            i = j + 1
        elif c == "|":
            j = i + 1
            while j < n and text[j] != "|":
                j += 1
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '();"':
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _parse_sexprs(tokens: List[str]):
    out = []
    stack: List[list] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SExprError("unbalanced parenthesis in solver output")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise SExprError("unterminated s-expression in solver output")
    return out


@dataclass
class ModelValue:
    """One model entry; irrational algebraic values keep only an approximation."""

    exact: Optional[Fraction]
    approx: Optional[float]

    @property
    def is_exact(self) -> bool:
        return self.exact is not None


def _eval_value(node) -> ModelValue:
    if isinstance(node, str):
        try:
            return ModelValue(Fraction(node), None)
        except ValueError as exc:
            raise SExprError(f"unrecognized model constant {node!r}") from exc
    if not node:
        raise SExprError("empty value expression")
    head = node[0]
    if head == "-" and len(node) == 2:
        v = _eval_value(node[1])
        if v.is_exact:
            return ModelValue(-v.exact, None)
        return ModelValue(None, -v.approx if v.approx is not None else None)
    if head == "/" and len(node) == 3:
        a, b = _eval_value(node[1]), _eval_value(node[2])
        if a.is_exact and b.is_exact:
            return ModelValue(a.exact / b.exact, None)
        raise SExprError("non-rational quotient in model")
    if head == "+":
        vals = [_eval_value(x) for x in node[1:]]
        if all(v.is_exact for v in vals):
            return ModelValue(sum(v.exact for v in vals), None)
    if head == "*":
        vals = [_eval_value(x) for x in node[1:]]
        if all(v.is_exact for v in vals):
            total = Fraction(1)
            for v in vals:
                total *= v.exact
            return ModelValue(total, None)
    if head == "root-obj":
        return ModelValue(None, _approx_root_obj(node))
    raise SExprError(f"unrecognized model value {node!r}")


def _approx_root_obj(node) -> Optional[float]:
    """Numeric approximation of (root-obj <poly in one var> <index>)."""
    try:
        import numpy as np

        poly_sexpr, index = node[1], int(node[2])
        coeffs: Dict[int, float] = {}

        def walk(term, sign=1.0):
            if isinstance(term, str):
                try:
                    coeffs[0] = coeffs.get(0, 0.0) + sign * float(Fraction(term))
                    return
                except ValueError:
                    coeffs[1] = coeffs.get(1, 0.0) + sign  # the variable
                    return
            head = term[0]
            if head == "+":
                for t in term[1:]:
                    walk(t, sign)
            elif head == "-" and len(term) == 2:
                walk(term[1], -sign)
            elif head == "^":
                coeffs[int(term[2])] = coeffs.get(int(term[2]), 0.0) + sign
            elif head == "*":
                # coefficient times a power or variable
                c = float(Fraction(term[1]))
                rest = term[2]
                if isinstance(rest, str):
                    coeffs[1] = coeffs.get(1, 0.0) + sign * c
                else:
                    coeffs[int(rest[2])] = coeffs.get(int(rest[2]), 0.0) + sign * c
            else:
                raise SExprError(f"root-obj term {term!r}")

        walk(poly_sexpr)
        deg = max(coeffs)
        arr = [coeffs.get(deg - i, 0.0) for i in range(deg + 1)]
        roots = sorted(r.real for r in np.roots(arr) if abs(r.imag) < 1e-9)
        if 1 <= index <= len(roots):
            return roots[index - 1]
    except Exception:
        pass
    return None


@dataclass
class SolverReply:
    status: str  # sat | unsat | unknown | error
    model: Dict[str, ModelValue] = field(default_factory=dict)
    raw: str = ""

    @property
    def rational_model(self) -> Optional[Dict[str, Fraction]]:
        """Exact witness, or None when any entry is irrational."""
        if any(not v.is_exact for v in self.model.values()):
            return None
        return {name: v.exact for name, v in self.model.items()}

    @property
    def approx_model(self) -> Dict[str, float]:
        out = {}
        for name, v in self.model.items():
            if v.is_exact:
                out[name] = float(v.exact)
            elif v.approx is not None:
                out[name] = v.approx
        return out


def parse_solver_reply(text: str) -> SolverReply:
    """Interpret a one-shot solver conversation: status plus optional model.

    ``(error ...)`` nodes after an unsat status (from the unconditional
    get-model) are ignored; an error with no status at all is reported.
    """
    status = None
    for line in text.splitlines():
        word = line.strip()
        if word in ("sat", "unsat", "unknown"):
            status = word
            break
    if status is None:
        return SolverReply("error", raw=text)
    reply = SolverReply(status, raw=text)
    if status != "sat":
        return reply
    try:
        start = text.index(status) + len(status)
        nodes = _parse_sexprs(_tokenize_sexpr(text[start:]))
    except SExprError:
        return reply
    for node in nodes:
        if not isinstance(node, list):
            continue
        entries = node[1:] if node and node[0] == "model" else node
        for entry in entries:
            if (
                isinstance(entry, list)
                and len(entry) >= 5
                and entry[0] == "define-fun"
                and entry[2] == []
            ):
                name = entry[1]
                try:
                    reply.model[name] = _eval_value(entry[4])
                except SExprError:
                    reply.model[name] = ModelValue(None, None)
    return reply
