import json
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from polyinv.cli import cli, main
from polyinv.report import validate_report

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


@pytest.fixture
def runner():
    return CliRunner()


def _solver_args(solver_cfg):
    return ["--solver-cmd", " ".join(solver_cfg.command)]


class TestCheckCommand:
    def test_valid_exit_zero(self, runner, solver_cfg):
        result = runner.invoke(
            cli,
            ["check", str(PROBLEMS / "template_2d.prob"), "-p", "a=-1"]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 0, result.output
        assert "VALID" in result.output

    def test_invalid_exit_one_with_witness(self, runner, solver_cfg):
        result = runner.invoke(
            cli,
            ["check", str(PROBLEMS / "disjunctive_2d.prob"), "-p", "a=1", "-p", "b=1"]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 1
        assert "witness" in result.output

    def test_json_report_validates(self, runner, solver_cfg, tmp_path):
        result = runner.invoke(
            cli,
            ["check", str(PROBLEMS / "aircraft_turn.prob"), "--json"]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        validate_report(report)
        assert report["verdict"]["status"] == "valid"
        assert report["shape"] == "equational"
        assert {g["name"] for g in report["goals"]} == {
            "init-in-candidate",
            "derivatives-vanish-on-zero-set",
        }
        # enough is embedded to re-run the query
        assert "invariant:" in report["problem"]["source"]

    def test_emit_flag_writes_script(self, runner, solver_cfg, tmp_path):
        out = tmp_path / "goal.smt2"
        result = runner.invoke(
            cli,
            [
                "check",
                str(PROBLEMS / "template_2d.prob"),
                "-p",
                "a=-1",
                "--emit",
                str(out),
            ]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 0
        assert out.read_text().startswith("(set-info :smt-lib-version 2.6)")

    def test_transcript_dir(self, runner, solver_cfg, tmp_path):
        tdir = tmp_path / "transcripts"
        result = runner.invoke(
            cli,
            [
                "check",
                str(PROBLEMS / "train_brake.prob"),
                "--transcript-dir",
                str(tdir),
            ]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 0
        assert list(tdir.glob("*.smt2"))


class TestGenerateCommand:
    def test_grid_generation(self, runner, solver_cfg):
        result = runner.invoke(
            cli,
            [
                "generate",
                str(PROBLEMS / "template_2d.prob"),
                "--grid",
                "a=-1:0:1",
                "--json",
            ]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        validate_report(report)
        gen = report["generation"]
        assert gen["mode"] == "witness-list"
        assert [w["a"] for w in gen["witnesses"]] == ["-1", "0"]
        assert gen["sample"] == {"a": "-1"}

    def test_empty_grid_result_is_success(self, runner, solver_cfg, tmp_path):
        # a template whose instantiations on this grid all fail
        text = (
            "vars: x\nparams: c\nfield: x' = 1\n"
            "init: x = 0\ninvariant: c - x >= 0\n"
        )
        path = tmp_path / "drift.prob"
        path.write_text(text)
        result = runner.invoke(
            cli,
            ["generate", str(path), "--grid", "c=0:1:1", "--json"]
            + _solver_args(solver_cfg),
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["generation"]["witnesses"] == []


class TestInspectionCommands:
    def test_lie_chain_output(self, runner):
        result = runner.invoke(
            cli, ["lie", str(PROBLEMS / "template_2d.prob"), "-k", "2"]
        )
        assert result.exit_code == 0
        lines = result.output.splitlines()
        assert lines[0].startswith("L^0 = ")
        assert len(lines) == 3

    def test_rank_output(self, runner):
        result = runner.invoke(cli, ["rank", str(PROBLEMS / "template_2d.prob")])
        assert result.exit_code == 0
        assert "N = 2" in result.output

    def test_trans_output(self, runner):
        result = runner.invoke(
            cli, ["trans", str(PROBLEMS / "disjunctive_2d.prob"), "--atom", "0"]
        )
        assert result.exit_code == 0
        for label in (
            "immediate-exit",
            "immediate-entry",
            "identically-zero",
            "reverse-entry",
        ):
            assert label in result.output

    def test_rank_cap_exceeded_exit_two(self, runner):
        result = runner.invoke(
            cli, ["rank", str(PROBLEMS / "template_2d.prob"), "--max-order", "1"]
        )
        assert result.exit_code == 2
        assert "unknown" in result.output


class TestFalsifyCommand:
    def test_violation_found(self, runner):
        result = runner.invoke(
            cli,
            [
                "falsify",
                str(PROBLEMS / "template_2d.prob"),
                "-p",
                "a=1",
                "--points",
                "2",
                "--horizon",
                "0.5",
            ],
        )
        assert result.exit_code == 1
        assert "t = 0" in result.output

    def test_no_violation(self, runner):
        result = runner.invoke(
            cli,
            [
                "falsify",
                str(PROBLEMS / "template_2d.prob"),
                "-p",
                "a=-1",
                "--points",
                "2",
                "--horizon",
                "1",
            ],
        )
        assert result.exit_code == 0

    def test_csv_dump(self, runner, tmp_path):
        outdir = tmp_path / "csv"
        result = runner.invoke(
            cli,
            [
                "falsify",
                str(PROBLEMS / "aircraft_turn.prob"),
                "--points",
                "1",
                "--horizon",
                "0.1",
                "--step",
                "0.01",
                "--dump-csv",
                str(outdir),
                "--json",
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        validate_report(report)
        files = report["falsification"]["csv_files"]
        assert files and Path(files[0]).read_text().startswith("t,x1,")


class TestEmitCommand:
    def test_byte_stable_across_runs(self, runner, tmp_path):
        out1, out2 = tmp_path / "a.smt2", tmp_path / "b.smt2"
        for out in (out1, out2):
            result = runner.invoke(
                cli, ["emit", str(PROBLEMS / "train_brake.prob"), "-o", str(out)]
            )
            assert result.exit_code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_qe_script(self, runner, tmp_path):
        out = tmp_path / "gen.qe"
        result = runner.invoke(
            cli,
            ["emit", str(PROBLEMS / "template_2d.prob"), "--qe", "-o", str(out)],
        )
        assert result.exit_code == 0
        text = out.read_text()
        assert text.startswith("# qe-script v1")
        assert "forall: x, y" in text


class TestExitCodeContract:
    def _main_exit(self, monkeypatch, argv):
        monkeypatch.setattr(sys, "argv", ["polyinv"] + argv)
        with pytest.raises(SystemExit) as exc:
            main()
        return exc.value.code or 0

    def test_malformed_file_exits_three(self, monkeypatch, tmp_path):
        bad = tmp_path / "bad.prob"
        bad.write_text("vars: x\nfield: x' = \ninit: x = 0\ninvariant: x >= 0\n")
        assert self._main_exit(monkeypatch, ["check", str(bad)]) == 3

    def test_unknown_parameter_exits_three(self, monkeypatch):
        assert (
            self._main_exit(
                monkeypatch,
                ["check", str(PROBLEMS / "template_2d.prob"), "-p", "zz=1"],
            )
            == 3
        )

    def test_missing_instantiation_exits_three(self, monkeypatch):
        assert (
            self._main_exit(monkeypatch, ["check", str(PROBLEMS / "template_2d.prob")])
            == 3
        )

    def test_bad_flag_exits_three(self, monkeypatch):
        assert self._main_exit(monkeypatch, ["check", "--no-such-flag"]) == 3
