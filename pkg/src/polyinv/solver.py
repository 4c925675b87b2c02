"""External solver processes: configuration, discovery, execution.

The backend is any executable that reads one SMT-LIB 2 script on stdin
and prints the solver conversation on stdout. A Z3 WebAssembly shim is
bundled as package data for environments without a native solver; any
native solver works via ``--solver-cmd`` (e.g. ``z3 -in`` or ``cvc5``).
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union


class SolverNotFound(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    command: tuple
    timeout_s: float = 60.0
    logic: str = "QF_NRA"
    supports_quantifiers: bool = True
    workers: int = 4

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("solver timeout must be positive")
        if not self.command:
            raise ValueError("empty solver command")


def bundled_shim_command() -> Optional[tuple]:
    node = shutil.which("node")
    if node is None:
        return None
    shim = Path(__file__).parent / "data" / "z3smt2.js"
    if not shim.exists():
        return None
    return (node, str(shim))


def default_solver_config(
    command: Union[str, Sequence[str], None] = None,
    timeout_s: float = 60.0,
    workers: int = 4,
) -> SolverConfig:
    """Resolve the backend: explicit command, environment override,
    native z3/cvc5 on PATH, then the bundled Z3 shim."""
    if command:
        argv = tuple(shlex.split(command)) if isinstance(command, str) else tuple(command)
        return SolverConfig(argv, timeout_s=timeout_s, workers=workers)
    env_cmd = os.environ.get("POLYINV_SOLVER_CMD")
    if env_cmd:
        return SolverConfig(tuple(shlex.split(env_cmd)), timeout_s=timeout_s, workers=workers)
    z3 = shutil.which("z3")
    if z3:
        return SolverConfig((z3, "-in"), timeout_s=timeout_s, workers=workers)
    cvc5 = shutil.which("cvc5")
    if cvc5:
        return SolverConfig(
            (cvc5, "--lang", "smt2"), timeout_s=timeout_s, workers=workers
        )
    shim = bundled_shim_command()
    if shim:
        return SolverConfig(shim, timeout_s=timeout_s, workers=workers)
    raise SolverNotFound(
        "no SMT solver found: pass --solver-cmd, set POLYINV_SOLVER_CMD, put "
        "z3/cvc5 on PATH, or install the bundled backend with 'npm install'"
    )


@dataclass
class RunResult:
    stdout: str
    stderr: str
    returncode: Optional[int]
    elapsed_s: float
    timed_out: bool = False
    launch_error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.launch_error is None and not self.timed_out


def run_script(script: str, cfg: SolverConfig) -> RunResult:
    """Feed one script to a fresh solver process and collect its reply."""
    start = time.monotonic()
    try:
        proc = subprocess.run(
            list(cfg.command),
            input=script.encode(),
            capture_output=True,
            timeout=cfg.timeout_s,
        )
    except FileNotFoundError as exc:
        return RunResult("", "", None, time.monotonic() - start, launch_error=str(exc))
    except subprocess.TimeoutExpired as exc:
        out = exc.stdout.decode(errors="replace") if exc.stdout else ""
        err = exc.stderr.decode(errors="replace") if exc.stderr else ""
        return RunResult(out, err, None, time.monotonic() - start, timed_out=True)
    return RunResult(
        proc.stdout.decode(errors="replace"),
        proc.stderr.decode(errors="replace"),
        proc.returncode,
        time.monotonic() - start,
    )
