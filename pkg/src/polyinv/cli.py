"""Command-line interface.

Exit codes: 0 valid / no violation, 1 invalid / violation found,
2 unknown (timeout, solver gave up, rank cap exceeded, cannot sample),
3 usage or configuration error (malformed file, bad flags, no solver).
"""

from __future__ import annotations

import json
import random
import sys
import time
from pathlib import Path
import click

from .decide import (
    CheckResult,
    TranscriptSink,
    build_goals,
    check_init_subset_domain,
    check_invariant,
    emit_generation_qe_script,
    generate_constraint,
    pick_sample,
)
from .formulas import (
    RankBoundCache,
    all_derivs_zero,
    conj,
    first_sign_neg,
    first_sign_pos,
    normalize_dnf,
    substitute,
)
from .groebner import DEFAULT_CAP, FixedPointNotReached
from .parser import (
    ParseError,
    parse_assignments,
    parse_grid,
    parse_problem,
)
from .poly import format_poly, lie_chain
from .report import (
    check_report,
    falsification_report,
    generation_report,
    init_check_report,
)
from .simulate import SampleBudget, integrate, numeric_ci_check, sample_init_points
from .smtlib import emit_validity_script
from .solver import SolverNotFound, default_solver_config

EXIT_UNKNOWN = 2
EXIT_USAGE = 3


def _load_problem(path: str):
    return parse_problem(Path(path).read_text())


def _solver_options(fn):
    fn = click.option(
        "--solver-cmd",
        default=None,
        help="external SMT-LIB 2 solver command (default: autodetect)",
    )(fn)
    fn = click.option(
        "--timeout",
        "timeout_s",
        default=60.0,
        show_default=True,
        type=float,
        help="seconds per solver query",
    )(fn)
    fn = click.option(
        "--workers",
        default=4,
        show_default=True,
        type=int,
        help="concurrent solver processes",
    )(fn)
    return fn


def _cap_option(fn):
    return click.option(
        "--max-order",
        "cap",
        default=DEFAULT_CAP,
        show_default=True,
        type=int,
        help="cap for the rank-bound fixed-point search",
    )(fn)


def _values_for(prob, param_flags):
    if not param_flags:
        return None
    return parse_assignments(list(param_flags), prob.params)


def _select_atom(prob, target: str, index: int):
    formula = prob.candidate if target == "invariant" else prob.domain
    dnf = normalize_dnf(formula)
    atoms = []
    for clause in dnf.disjuncts:
        for p, _rel in clause:
            if p not in atoms:
                atoms.append(p)
    if not atoms:
        raise click.UsageError(f"the {target} has no polynomial atoms")
    if not 0 <= index < len(atoms):
        raise click.UsageError(
            f"--atom {index} out of range; the {target} has {len(atoms)} atom(s)"
        )
    return atoms[index]


def _echo_verdict(result: CheckResult) -> None:
    v = result.verdict
    suffix = f"  (failed goal: {v.goal})" if v.goal and not v.is_valid else ""
    click.echo(f"verdict: {v.status.upper()}  [shape: {result.shape}]{suffix}")
    for g in result.goals:
        click.echo(
            f"  {g.name}: {g.verdict.status} ({g.discharged_by}, {g.elapsed_s:.2f}s)"
        )
    if v.witness:
        pairs = ", ".join(f"{k} = {val}" for k, val in v.witness.items())
        click.echo(f"witness: {pairs}")
    elif v.witness_approx:
        pairs = ", ".join(f"{k} ~ {val:g}" for k, val in v.witness_approx.items())
        click.echo(f"witness (inexact): {pairs}")
    if v.reason:
        click.echo(f"reason: {v.reason}")
    if result.rank_bounds:
        bounds = "; ".join(f"{p}: {n}" for p, n in result.rank_bounds.items())
        click.echo(f"rank bounds: {bounds}")


@click.group()
@click.version_option()
def cli():
    """Check and generate semi-algebraic invariants of polynomial vector fields."""


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-p", "param", multiple=True, help="parameter instantiation name=value")
@click.option("--json", "as_json", is_flag=True, help="machine-readable report")
@click.option("--emit", "emit_path", type=click.Path(), default=None,
              help="also write the combined validity script to this path")
@click.option("--transcript-dir", type=click.Path(), default=None,
              help="write per-goal solver scripts and replies here")
@click.option("--skip-init-domain-check", is_flag=True,
              help="skip the init-within-domain warning check")
@_solver_options
@_cap_option
def check(problem_file, param, as_json, emit_path, transcript_dir,
          skip_init_domain_check, solver_cmd, timeout_s, workers, cap):
    """Decide whether the candidate invariant holds for the system."""
    start = time.monotonic()
    prob = _load_problem(problem_file)
    values = _values_for(prob, param)
    cfg = default_solver_config(solver_cmd, timeout_s, workers)
    if emit_path:
        Path(emit_path).write_text(_combined_script(prob, values, cap, cfg.logic))
    sink = TranscriptSink(Path(transcript_dir)) if transcript_dir else None
    result = check_invariant(prob, values, cfg, cap, sink)
    if not skip_init_domain_check:
        side = check_init_subset_domain(
            prob if values is None else prob.instantiated(values), cfg
        )
        if side.is_invalid:
            click.echo(
                "warning: the initial set is not contained in the domain "
                f"(witness {side.witness})",
                err=True,
            )
    report = check_report(
        prob, values, result, cfg, time.monotonic() - start,
        flags={"max_order": cap},
        transcripts=sink.entries if sink else None,
    )
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        _echo_verdict(result)
        click.echo(f"time: {report['timing']['total_s']:.2f}s")
    sys.exit(result.verdict.exit_code())


def _combined_script(prob, values, cap, logic):
    cache = RankBoundCache(prob.field, params=prob.params, cap=cap)
    _shape, goals = build_goals(prob, cache)
    matrix = conj(*(g.formula for g in goals))
    if values:
        matrix = substitute(matrix, dict(values))
    elif prob.params:
        raise click.UsageError(
            "emitting a validity script for a template needs -p values "
            "(use 'emit --qe' for the quantified generation script)"
        )
    return emit_validity_script(matrix, prob.vars, logic=logic)


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", "grid_spec", default=None,
              help="parameter grid, e.g. a=-2:2:1,b=-1:1:1")
@click.option("--strategy", type=click.Choice(["grid", "exists", "qe-result"]),
              default="grid", show_default=True)
@click.option("--qe-result", "qe_result_path", type=click.Path(exists=True),
              default=None, help="constraint file returned by an external QE tool")
@click.option("--json", "as_json", is_flag=True)
@click.option("--transcript-dir", type=click.Path(), default=None)
@_solver_options
@_cap_option
def generate(problem_file, grid_spec, strategy, qe_result_path, as_json,
             transcript_dir, solver_cmd, timeout_s, workers, cap):
    """Search for parameter values that make the template an invariant."""
    start = time.monotonic()
    prob = _load_problem(problem_file)
    if not prob.params:
        raise click.UsageError("the problem declares no parameters to solve for")
    cfg = default_solver_config(solver_cmd, timeout_s, workers)
    grid = parse_grid(grid_spec, prob.params) if grid_spec else None
    if strategy == "grid" and grid is None:
        raise click.UsageError("--strategy grid needs --grid")
    if strategy == "qe-result" and qe_result_path is None:
        raise click.UsageError("--strategy qe-result needs --qe-result FILE")
    sink = TranscriptSink(Path(transcript_dir)) if transcript_dir else None
    qe_text = Path(qe_result_path).read_text() if qe_result_path else None
    result = generate_constraint(
        prob, cfg, strategy, grid, cap, qe_text, sink
    )
    sample = pick_sample(result, prob.params, cfg)
    report = generation_report(
        prob, result, sample, cfg, time.monotonic() - start,
        flags={"strategy": strategy, "grid": grid_spec, "max_order": cap},
        transcripts=sink.entries if sink else None,
    )
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(f"mode: {result.mode}")
        if result.constraint is not None:
            click.echo(f"constraint: {result.constraint}")
        for w in result.witnesses:
            click.echo("witness: " + ", ".join(f"{k} = {v}" for k, v in w.items()))
        if not result.witnesses and result.mode == "witness-list":
            click.echo("no witnesses found" + (f" ({result.reason})" if result.reason else ""))
        if sample:
            click.echo("sample: " + ", ".join(f"{k} = {v}" for k, v in sample.items()))
        if result.reason and result.mode == "unknown":
            click.echo(f"reason: {result.reason}")
    sys.exit(EXIT_UNKNOWN if result.mode == "unknown" else 0)


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-k", "--order", default=2, show_default=True, type=int,
              help="highest Lie-derivative order to print")
@click.option("--target", type=click.Choice(["invariant", "domain"]),
              default="invariant", show_default=True)
@click.option("--atom", "atom_index", default=0, show_default=True, type=int)
def lie(problem_file, order, target, atom_index):
    """Print the Lie-derivative chain of one atom's polynomial."""
    prob = _load_problem(problem_file)
    p = _select_atom(prob, target, atom_index)
    for i, q in enumerate(lie_chain(p, prob.field, order)):
        click.echo(f"L^{i} = {format_poly(q)}")


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", type=click.Choice(["invariant", "domain"]),
              default="invariant", show_default=True)
@click.option("--atom", "atom_index", default=0, show_default=True, type=int)
@_cap_option
def rank(problem_file, target, atom_index, cap):
    """Print the uniform rank bound of one atom's polynomial."""
    prob = _load_problem(problem_file)
    p = _select_atom(prob, target, atom_index)
    cache = RankBoundCache(prob.field, params=prob.params, cap=cap)
    try:
        rb = cache.bound(p)
    except FixedPointNotReached as exc:
        click.echo(f"unknown: {exc}")
        sys.exit(EXIT_UNKNOWN)
    click.echo(f"N = {rb.value}")
    for i, q in enumerate(rb.chain[:-1]):
        click.echo(f"L^{i} = {format_poly(q)}")
    click.echo(
        f"L^{rb.value + 1} = {format_poly(rb.chain[-1])} is in the ideal of the chain"
    )


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", type=click.Choice(["invariant", "domain"]),
              default="invariant", show_default=True)
@click.option("--atom", "atom_index", default=0, show_default=True, type=int)
@_cap_option
def trans(problem_file, target, atom_index, cap):
    """Print the flow-behavior formulas for one atom's polynomial."""
    prob = _load_problem(problem_file)
    p = _select_atom(prob, target, atom_index)
    cache = RankBoundCache(prob.field, params=prob.params, cap=cap)
    try:
        rb = cache.bound(p)
    except FixedPointNotReached as exc:
        click.echo(f"unknown: {exc}")
        sys.exit(EXIT_UNKNOWN)
    click.echo(f"atom: {format_poly(p)}   (rank bound N = {rb.value})")
    click.echo(f"immediate-exit:    {first_sign_neg(p, rb)}")
    click.echo(f"immediate-entry:   {first_sign_pos(p, rb)}")
    click.echo(f"identically-zero:  {all_derivs_zero(p, rb)}")
    click.echo(f"reverse-entry:     {first_sign_pos(p, rb, reverse_time=True)}")


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-p", "param", multiple=True)
@click.option("--points", default=100, show_default=True, type=int)
@click.option("--horizon", default=10.0, show_default=True, type=float)
@click.option("--step", default=1e-3, show_default=True, type=float)
@click.option("--tolerance", default=1e-6, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--dump-csv", "csv_dir", type=click.Path(), default=None,
              help="write sampled trajectories as CSV files here")
@click.option("--json", "as_json", is_flag=True)
def falsify(problem_file, param, points, horizon, step, tolerance, seed,
            csv_dir, as_json):
    """Numerically hunt for a trajectory violating the candidate."""
    start = time.monotonic()
    prob = _load_problem(problem_file)
    values = _values_for(prob, param)
    closed = prob.instantiated(values) if values else prob
    if closed.is_parametric:
        raise click.UsageError("template problems need -p values for falsification")
    budget = SampleBudget(points, horizon, step, tolerance)
    outcome = numeric_ci_check(closed, budget, random.Random(seed))
    csv_files = []
    if csv_dir:
        directory = Path(csv_dir)
        directory.mkdir(parents=True, exist_ok=True)
        rng = random.Random(seed)
        for i, pt in enumerate(sample_init_points(closed, budget, rng)):
            traj = integrate(
                closed.field, [float(pt[v]) for v in closed.vars], budget
            )
            path = directory / f"trajectory_{i:03d}.csv"
            traj.write_csv(path, closed.vars)
            csv_files.append(str(path))
    report = falsification_report(
        prob, values, outcome, budget, time.monotonic() - start, csv_files
    )
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(f"outcome: {outcome.kind} (tried {outcome.points_tried} start points)")
        if outcome.kind == "violation":
            click.echo(f"violation at t = {outcome.t:g} from x0 = {outcome.x0}")
        if outcome.detail:
            click.echo(outcome.detail)
        for path in csv_files:
            click.echo(f"wrote {path}")
    sys.exit({"no-violation": 0, "violation": 1}.get(outcome.kind, EXIT_UNKNOWN))


@cli.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", "output_path", required=True, type=click.Path())
@click.option("-p", "param", multiple=True)
@click.option("--qe", "as_qe", is_flag=True,
              help="emit the quantified generation script instead of SMT-LIB")
@_cap_option
def emit(problem_file, output_path, param, as_qe, cap):
    """Write a solver script without invoking any solver."""
    prob = _load_problem(problem_file)
    values = _values_for(prob, param)
    if as_qe:
        if values:
            raise click.UsageError("--qe emits the template script; drop -p values")
        text = emit_generation_qe_script(prob, cap)
    else:
        text = _combined_script(prob, values, cap, "QF_NRA")
    Path(output_path).write_text(text)
    click.echo(f"wrote {output_path}")


@cli.command("init-check")
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-p", "param", multiple=True)
@click.option("--json", "as_json", is_flag=True)
@_solver_options
def init_check(problem_file, param, as_json, solver_cmd, timeout_s, workers):
    """Check the modeling assumption that the initial set lies in the domain."""
    start = time.monotonic()
    prob = _load_problem(problem_file)
    values = _values_for(prob, param)
    closed = prob.instantiated(values) if values else prob
    cfg = default_solver_config(solver_cmd, timeout_s, workers)
    verdict = check_init_subset_domain(closed, cfg)
    if as_json:
        click.echo(json.dumps(
            init_check_report(prob, verdict, cfg, time.monotonic() - start), indent=2
        ))
    else:
        click.echo(f"init-in-domain: {verdict.status}")
        if verdict.witness:
            click.echo("witness: " + ", ".join(f"{k} = {v}" for k, v in verdict.witness.items()))
    sys.exit(verdict.exit_code())


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except (ParseError, SolverNotFound) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)


if __name__ == "__main__":
    main()
