"""Plain-text first-order scripts for external quantifier-elimination tools.

The emitted file is a quantifier prefix followed by a matrix in the
problem-file formula grammar::

    # qe-script v1
    params: a, b
    forall: x, y
    matrix:
    <formula over the parameters and quantified variables>

A QE tool is expected to return a quantifier-free constraint over the
parameters, written as a single formula in the same grammar (blank lines
and ``#`` comments allowed). ``parse_qe_result`` reads that file back.
"""

from __future__ import annotations

from typing import Sequence

from .formulas import Formula
from .parser import ParseError, parse_formula

HEADER = "# qe-script v1"


def emit_qe_script(
    matrix: Formula, forall_vars: Sequence[str], params: Sequence[str]
) -> str:
    lines = [HEADER]
    if params:
        lines.append("params: " + ", ".join(params))
    lines.append("forall: " + ", ".join(forall_vars))
    lines.append("matrix:")
    lines.append(str(matrix))
    return "\n".join(lines) + "\n"


def parse_qe_result(text: str, params: Sequence[str]) -> Formula:
    """Constraint over the parameters as returned by an external QE tool."""
    body = "\n".join(
        line for line in text.splitlines() if line.split("#", 1)[0].strip()
    )
    stripped = body.strip()
    if not stripped:
        raise ParseError("empty QE result", 1, 1)
    return parse_formula(stripped, tuple(params))
