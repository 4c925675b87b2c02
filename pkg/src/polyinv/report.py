"""Machine-readable run reports, schema-validated before emission.

Every report embeds the problem source and the settings needed to re-run
the query; rationals are serialized as exact fraction strings.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from typing import Dict, List, Mapping, Optional

import jsonschema

from .decide import CheckResult, GenerationResult, Verdict
from .formulas import Problem
from .simulate import CIOutcome, SampleBudget
from .solver import SolverConfig

SCHEMA_VERSION = 1

with resources.files("polyinv.data").joinpath("report_schema.json").open() as _fh:
    REPORT_SCHEMA = json.load(_fh)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def _rationals(values: Optional[Mapping[str, Fraction]]) -> Optional[Dict[str, str]]:
    if values is None:
        return None
    return {k: str(v) for k, v in values.items()}


def _verdict_block(v: Verdict) -> dict:
    return {
        "status": v.status,
        "witness": _rationals(v.witness),
        "witness_approx": dict(v.witness_approx) if v.witness_approx else None,
        "witness_exact": v.witness_exact,
        "reason": v.reason,
        "goal": v.goal,
    }


def _base(
    kind: str,
    prob: Problem,
    total_s: float,
    cfg: Optional[SolverConfig],
    values: Optional[Mapping[str, Fraction]] = None,
    flags: Optional[dict] = None,
    transcripts: Optional[List[dict]] = None,
) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "problem": {"source": prob.source},
        "timing": {"total_s": total_s},
    }
    if values is not None:
        report["problem"]["parameter_values"] = _rationals(values)
    if cfg is not None:
        report["solver"] = {
            "command": list(cfg.command),
            "timeout_s": cfg.timeout_s,
            "logic": cfg.logic,
            "workers": cfg.workers,
        }
    if flags:
        report["flags"] = flags
    if transcripts:
        report["transcripts"] = transcripts
    return report


def check_report(
    prob: Problem,
    values: Optional[Mapping[str, Fraction]],
    result: CheckResult,
    cfg: SolverConfig,
    total_s: float,
    flags: Optional[dict] = None,
    transcripts: Optional[List[dict]] = None,
) -> dict:
    report = _base("check", prob, total_s, cfg, values, flags, transcripts)
    report["shape"] = result.shape
    report["verdict"] = _verdict_block(result.verdict)
    report["goals"] = [
        {
            "name": g.name,
            "status": g.verdict.status,
            "discharged_by": g.discharged_by,
            "time_s": g.elapsed_s,
        }
        for g in result.goals
    ]
    report["rank_bounds"] = dict(result.rank_bounds)
    validate_report(report)
    return report


def generation_report(
    prob: Problem,
    result: GenerationResult,
    sample: Optional[Mapping[str, Fraction]],
    cfg: SolverConfig,
    total_s: float,
    flags: Optional[dict] = None,
    transcripts: Optional[List[dict]] = None,
) -> dict:
    report = _base("generate", prob, total_s, cfg, flags=flags, transcripts=transcripts)
    report["generation"] = {
        "mode": result.mode,
        "witnesses": [_rationals(w) for w in result.witnesses],
        "sample": _rationals(sample),
        "constraint": str(result.constraint) if result.constraint is not None else None,
        "reason": result.reason,
        "checks": [
            {"values": _rationals(assignment), "status": verdict.status}
            for assignment, verdict in result.checks
        ],
    }
    validate_report(report)
    return report


def falsification_report(
    prob: Problem,
    values: Optional[Mapping[str, Fraction]],
    outcome: CIOutcome,
    budget: SampleBudget,
    total_s: float,
    csv_files: Optional[List[str]] = None,
    flags: Optional[dict] = None,
) -> dict:
    report = _base("falsify", prob, total_s, None, values, flags)
    report["falsification"] = {
        "outcome": outcome.kind,
        "x0": list(outcome.x0) if outcome.x0 is not None else None,
        "t": outcome.t,
        "points_tried": outcome.points_tried,
        "budget": {
            "n_init_points": budget.n_init_points,
            "horizon": budget.horizon,
            "step": budget.step,
            "tolerance": budget.tolerance,
        },
        "csv_files": csv_files or [],
    }
    validate_report(report)
    return report


def init_check_report(
    prob: Problem, verdict: Verdict, cfg: SolverConfig, total_s: float
) -> dict:
    report = _base("init-check", prob, total_s, cfg)
    report["verdict"] = _verdict_block(verdict)
    validate_report(report)
    return report
