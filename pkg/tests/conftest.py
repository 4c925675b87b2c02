import random
from fractions import Fraction

import pytest

from polyinv.poly import Polynomial, VectorField
from polyinv.solver import SolverNotFound, default_solver_config, run_script


@pytest.fixture(scope="session")
def solver_cfg():
    """A working SMT backend, or skip (the acceptance suite never skips)."""
    try:
        cfg = default_solver_config()
    except SolverNotFound as exc:
        pytest.skip(str(exc))
    probe = run_script("(set-logic QF_NRA)\n(check-sat)\n", cfg)
    if not probe.ok or "sat" not in probe.stdout:
        pytest.skip(f"solver backend not functional: {probe.stderr.strip()[:200]}")
    return cfg


def make_vars(*names):
    vs = tuple(names)
    return [Polynomial.variable(vs, n) for n in names]


@pytest.fixture
def xy():
    return make_vars("x", "y")


@pytest.fixture
def rng():
    return random.Random(20240811)


def random_poly(rng, vars, max_degree=3, max_terms=4, coeff_range=2):
    """Sparse random polynomial with small integer coefficients."""
    n = len(vars)
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        exps = [0] * n
        for _ in range(rng.randint(0, max_degree)):
            exps[rng.randrange(n)] += 1
        if sum(exps) > max_degree:
            continue
        c = rng.randint(-coeff_range, coeff_range)
        if c:
            terms[tuple(exps)] = terms.get(tuple(exps), 0) + c
    return Polynomial(vars, {e: Fraction(c) for e, c in terms.items() if c})


def random_field(rng, vars, max_degree=2):
    comps = []
    for _ in vars:
        p = random_poly(rng, vars, max_degree=max_degree, max_terms=3)
        comps.append(p)
    return VectorField.of(vars, comps)


def random_point(rng, vars, span=3):
    return {
        v: Fraction(rng.randint(-span, span), rng.randint(1, span)) for v in vars
    }
