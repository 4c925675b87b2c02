"""Problem-file grammar: tokenizer, recursive-descent parser, printer.

A problem file has labeled sections::

    vars: x, y
    params: a
    field: x' = -2*y; y' = x^2
    domain: -x - y^2 >= 0
    init: (x = -1 & y = 0.5) | (x = -0.5 & y = -0.6)
    invariant: a*y*(x - y) >= 0

Formulas combine polynomial sign atoms (>=, >, <=, <, =, !=) with
``&``, ``|``, ``!`` and ``->``. Decimal literals are exact rationals
(0.5 and 1/2 parse identically). ``domain:`` may be omitted (whole
space). ``#`` starts a comment. Every identifier must be declared in
``vars`` or ``params``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .formulas import (
    FALSE,
    TRUE,
    Formula,
    Problem,
    Rel,
    TrueF,
    atom,
    conj,
    disj,
    implies,
    negation,
)
from .poly import Polynomial, VectorField

SECTIONS = ("vars", "params", "field", "domain", "init", "invariant")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|>=|<=|!=|[-+*/^'(),;=><&|!])
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


def tokenize(text: str, line: int = 1, col_offset: int = 0) -> List[Token]:
    tokens = []
    col = col_offset
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        tok = m.group()
        if kind == "ws":
            nl = tok.count("\n")
            if nl:
                line += nl
                col = len(tok) - tok.rfind("\n") - 1
            else:
                col += len(tok)
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {tok!r}", line, col + 1)
        tokens.append(Token(kind, tok, line, col + 1))
        col += len(tok)
    return tokens


class _TokenStream:
    def __init__(self, tokens: List[Token], end_line: int):
        self.tokens = tokens
        self.pos = 0
        self.end_line = end_line

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end_line, 1)
        self.pos += 1
        return tok

    def accept(self, text: str) -> Optional[Token]:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.pos += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            got = "end of input" if tok is None else repr(tok.text)
            where = (self.end_line, 1) if tok is None else (tok.line, tok.col)
            raise ParseError(f"expected {text!r}, got {got}", *where)
        self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            return ParseError(message, self.end_line, 1)
        return ParseError(message, tok.line, tok.col)


_REL_TOKENS = {
    ">=": Rel.GE,
    ">": Rel.GT,
    "<=": Rel.LE,
    "<": Rel.LT,
    "=": Rel.EQ,
    "!=": Rel.NE,
}


class _ExprParser:
    """Arithmetic and formula parsing over a declared variable context."""

    def __init__(self, stream: _TokenStream, context: tuple):
        self.s = stream
        self.context = context

    # arithmetic ------------------------------------------------------

    def polynomial(self) -> Polynomial:
        p = self.term()
        while True:
            if self.s.accept("+"):
                p = p + self.term()
            elif self.s.accept("-"):
                p = p - self.term()
            else:
                return p

    def term(self) -> Polynomial:
        p = self.factor()
        while True:
            if self.s.accept("*"):
                p = p * self.factor()
            elif self.s.accept("/"):
                tok = self.s.peek()
                d = self.factor()
                if not d.is_constant():
                    raise ParseError(
                        "division is only defined by constants",
                        tok.line if tok else self.s.end_line,
                        tok.col if tok else 1,
                    )
                if d.constant_value() == 0:
                    raise ParseError(
                        "division by zero",
                        tok.line if tok else self.s.end_line,
                        tok.col if tok else 1,
                    )
                p = p / d.constant_value()
            else:
                return p

    def factor(self) -> Polynomial:
        if self.s.accept("-"):
            return -self.factor()
        p = self.primary()
        while self.s.accept("^"):
            tok = self.s.next()
            if tok.kind != "num" or "." in tok.text:
                raise ParseError(
                    "exponent must be a natural number", tok.line, tok.col
                )
            p = p ** int(tok.text)
        return p

    def primary(self) -> Polynomial:
        tok = self.s.peek()
        if tok is None:
            raise self.s.error("expected an expression")
        if tok.text == "(":
            self.s.next()
            p = self.polynomial()
            self.s.expect(")")
            return p
        if tok.kind == "num":
            self.s.next()
            return Polynomial.constant(self.context, Fraction(tok.text))
        if tok.kind == "ident":
            self.s.next()
            if tok.text in ("true", "false"):
                raise ParseError(
                    f"{tok.text!r} is a formula, not a polynomial", tok.line, tok.col
                )
            if tok.text not in self.context:
                raise ParseError(
                    f"undeclared variable {tok.text!r}", tok.line, tok.col
                )
            return Polynomial.variable(self.context, tok.text)
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    # formulas --------------------------------------------------------

    def formula(self) -> Formula:
        lhs = self.disjunction()
        if self.s.accept("->"):
            return implies(lhs, self.formula())
        return lhs

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.s.accept("|"):
            parts.append(self.conjunction())
        return disj(*parts) if len(parts) > 1 else parts[0]

    def conjunction(self) -> Formula:
        parts = [self.negation()]
        while self.s.accept("&"):
            parts.append(self.negation())
        return conj(*parts) if len(parts) > 1 else parts[0]

    def negation(self) -> Formula:
        if self.s.accept("!"):
            return negation(self.negation())
        tok = self.s.peek()
        if tok is not None and tok.kind == "ident" and tok.text in ("true", "false"):
            self.s.next()
            return TRUE if tok.text == "true" else FALSE
        # an opening parenthesis may close over a sub-formula or over the
        # arithmetic left-hand side of an atom; try the atom first and
        # fall back to the formula reading only when the ambiguity exists
        snapshot = self.s.pos
        try:
            return self.atom()
        except ParseError:
            if tok is None or tok.text != "(":
                raise
            self.s.pos = snapshot
        self.s.expect("(")
        f = self.formula()
        self.s.expect(")")
        return f

    def atom(self) -> Formula:
        lhs = self.polynomial()
        tok = self.s.peek()
        if tok is None or tok.text not in _REL_TOKENS:
            raise self.s.error("expected a relation (>=, >, <=, <, =, !=)")
        self.s.next()
        rhs = self.polynomial()
        return atom(lhs - rhs, _REL_TOKENS[tok.text])


def _split_sections(text: str) -> Dict[str, Tuple[str, int]]:
    """Map section name to (body text, starting line number)."""
    sections: Dict[str, Tuple[List[str], int]] = {}
    current: Optional[str] = None
    head_re = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:(.*)$")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = head_re.match(line)
        if m:
            name, rest = m.group(1), m.group(2)
            if name not in SECTIONS:
                raise ParseError(
                    f"unknown section {name!r} (expected one of {', '.join(SECTIONS)})",
                    lineno,
                    line.index(name) + 1,
                )
            if name in sections:
                raise ParseError(f"duplicate section {name!r}", lineno, 1)
            sections[name] = ([rest], lineno)
            current = name
        else:
            if current is None:
                raise ParseError("text before the first section label", lineno, 1)
            sections[current][0].append(line)
    return {
        name: ("\n".join(body), lineno) for name, (body, lineno) in sections.items()
    }


def _parse_name_list(body: str, lineno: int, kind: str) -> tuple:
    tokens = tokenize(body, line=lineno)
    names: List[str] = []
    stream = _TokenStream(tokens, lineno)
    while stream.peek() is not None:
        tok = stream.next()
        if tok.kind != "ident":
            raise ParseError(f"expected a {kind} name", tok.line, tok.col)
        if tok.text in ("true", "false"):
            raise ParseError(f"{tok.text!r} is reserved", tok.line, tok.col)
        if tok.text in names:
            raise ParseError(f"duplicate {kind} {tok.text!r}", tok.line, tok.col)
        names.append(tok.text)
        if stream.peek() is not None:
            stream.expect(",")
            if stream.peek() is None:
                raise ParseError("trailing comma", tok.line, tok.col)
    return tuple(names)


def _parse_field(
    body: str, lineno: int, vars: tuple, context: tuple, params: tuple
) -> VectorField:
    tokens = tokenize(body, line=lineno)
    stream = _TokenStream(tokens, lineno)
    equations: Dict[str, Polynomial] = {}
    while stream.peek() is not None:
        tok = stream.next()
        if tok.kind != "ident" or tok.text not in vars:
            raise ParseError(
                f"expected a state variable on the left of ', got {tok.text!r}",
                tok.line,
                tok.col,
            )
        if tok.text in equations:
            raise ParseError(f"duplicate equation for {tok.text!r}", tok.line, tok.col)
        stream.expect("'")
        stream.expect("=")
        rhs = _ExprParser(stream, context).polynomial()
        bad = rhs.occurring_vars() & set(params)
        if bad:
            raise ParseError(
                f"parameters {sorted(bad)} cannot appear in the vector field",
                tok.line,
                tok.col,
            )
        equations[tok.text] = rhs
        if stream.peek() is not None:
            stream.expect(";")
    missing = [v for v in vars if v not in equations]
    if missing:
        raise ParseError(
            f"field is missing equation(s) for {missing}", lineno, 1
        )
    components = []
    for v in vars:
        p = equations[v]
        if params:
            # drop the (never-occurring) parameter columns from the context
            keep_idx = [i for i, name in enumerate(p.vars) if name in vars]
            p = Polynomial(
                vars, {tuple(e[i] for i in keep_idx): c for e, c in p.terms.items()}
            )
        components.append(p)
    return VectorField.of(vars, components)


def _parse_formula_section(body: str, lineno: int, context: tuple) -> Formula:
    tokens = tokenize(body, line=lineno)
    stream = _TokenStream(tokens, lineno)
    f = _ExprParser(stream, context).formula()
    tok = stream.peek()
    if tok is not None:
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return f


def parse_problem(text: str) -> Problem:
    """Parse a problem file into its data model; errors carry positions."""
    sections = _split_sections(text)
    for required in ("vars", "field", "init", "invariant"):
        if required not in sections:
            raise ParseError(f"missing required section {required!r}", 1, 1)
    vars = _parse_name_list(*sections["vars"], kind="variable")
    if not vars:
        raise ParseError("at least one state variable is required", 1, 1)
    params = (
        _parse_name_list(*sections["params"], kind="parameter")
        if "params" in sections
        else ()
    )
    clash = set(vars) & set(params)
    if clash:
        raise ParseError(f"{sorted(clash)} declared as both variable and parameter", 1, 1)
    context = vars + params
    field = _parse_field(*sections["field"], vars=vars, context=context, params=params)
    domain = (
        _parse_formula_section(*sections["domain"], context=context)
        if "domain" in sections
        else TRUE
    )
    init = _parse_formula_section(*sections["init"], context=context)
    candidate = _parse_formula_section(*sections["invariant"], context=context)
    return Problem(
        vars=vars,
        params=params,
        field=field,
        domain=domain,
        init=init,
        candidate=candidate,
        source=text,
    )


def parse_formula(text: str, context: Sequence[str], line: int = 1) -> Formula:
    """Parse a standalone formula over a declared context."""
    tokens = tokenize(text, line=line)
    stream = _TokenStream(tokens, line)
    f = _ExprParser(stream, tuple(context)).formula()
    tok = stream.peek()
    if tok is not None:
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return f


def format_problem(prob: Problem) -> str:
    """Render a problem back into the file grammar (round-trip stable)."""
    lines = ["vars: " + ", ".join(prob.vars)]
    if prob.params:
        lines.append("params: " + ", ".join(prob.params))
    lines.append("field: " + str(prob.field))
    if not isinstance(prob.domain, TrueF):
        lines.append(f"domain: {prob.domain}")
    lines.append(f"init: {prob.init}")
    lines.append(f"invariant: {prob.candidate}")
    return "\n".join(lines) + "\n"


def parse_rational(text: str) -> Fraction:
    """Rational from '0.5', '1/2', '-3', etc."""
    return Fraction(text.strip())


def parse_assignments(pairs: Sequence[str], params: tuple) -> Dict[str, Fraction]:
    """-p name=value flags into an exact assignment."""
    out: Dict[str, Fraction] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"expected name=value, got {pair!r}")
        name, value = pair.split("=", 1)
        name = name.strip()
        if name not in params:
            raise ValueError(f"unknown parameter {name!r} (declared: {list(params)})")
        out[name] = parse_rational(value)
    return out


def parse_grid(spec: str, params: tuple) -> Dict[str, List[Fraction]]:
    """Grid spec 'a=-2:2:1,b=-1:1:1' into per-parameter value lists."""
    grid: Dict[str, List[Fraction]] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"expected name=start:stop:step, got {part!r}")
        name, rng = part.split("=", 1)
        name = name.strip()
        if name not in params:
            raise ValueError(f"unknown parameter {name!r} (declared: {list(params)})")
        pieces = rng.split(":")
        if len(pieces) == 1:
            grid[name] = [parse_rational(pieces[0])]
            continue
        if len(pieces) == 2:
            start, stop, step = pieces[0], pieces[1], "1"
        else:
            start, stop, step = pieces[:3]
        lo, hi, inc = parse_rational(start), parse_rational(stop), parse_rational(step)
        if inc <= 0:
            raise ValueError(f"grid step must be positive in {part!r}")
        values = []
        v = lo
        while v <= hi:
            values.append(v)
            v += inc
        grid[name] = values
    missing = [u for u in params if u not in grid]
    if missing:
        raise ValueError(f"grid does not cover parameter(s) {missing}")
    return grid
