"""Client for an external SMT solver speaking SMT-LIB2 over a pipe.

Feasibility questions are phrased in QF_NRA over the real-valued facts
collected in traces. The backend is resolved in order: the
PROBFP_SOLVER_CMD environment variable, a `z3` binary on PATH (run with
-in), then the bundled Node wrapper around the z3 WebAssembly build.

Answers are three-valued: an "unknown" verdict (including a per-query
timeout) is treated by callers as "satisfiable for all we know", which
keeps range pruning sound. A solver process that cannot be started or
dies mid-conversation raises SolverUnavailableError instead.
"""

from __future__ import annotations

import enum
import os
import queue
import shlex
import shutil
import subprocess
import threading
import time
from pathlib import Path
from typing import Iterable, Sequence

from .intervals import Interval
from .traces import smt_real

DEFAULT_TIMEOUT = 60.0
PRUNE_REL_TOL = 2.0 ** -20
_SENTINEL = "<<probfp-done>>"


class Result(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class SolverError(RuntimeError):
    """The solver reported an error or returned garbage."""


class SolverUnavailableError(SolverError):
    """No solver backend could be started, or the process died."""


class _Wedged(Exception):
    """The process stopped answering; distinct from a solver-side timeout."""


def bundled_wrapper() -> Path:
    return Path(__file__).parent / "solver" / "z3pipe.mjs"


def resolve_command(command: str | None = None) -> list[str]:
    """Pick the solver command line; raises if nothing is runnable."""
    if command:
        return shlex.split(command)
    env = os.environ.get("PROBFP_SOLVER_CMD")
    if env:
        return shlex.split(env)
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    wrapper = bundled_wrapper()
    node = shutil.which("node")
    if node and wrapper.exists():
        if not (wrapper.parent / "node_modules").exists():
            raise SolverUnavailableError(
                f"solver wrapper found but dependencies missing; run: npm install --prefix {wrapper.parent}")
        return [node, str(wrapper)]
    raise SolverUnavailableError(
        "no SMT solver available: set PROBFP_SOLVER_CMD, put z3 on PATH, "
        f"or install the bundled wrapper deps with: npm install --prefix {wrapper.parent}")


def solver_available(command: str | None = None) -> bool:
    try:
        resolve_command(command)
        return True
    except SolverUnavailableError:
        return False


class SolverClient:
    """Persistent solver process; one client is not thread-safe."""

    def __init__(self, command: str | None = None, timeout: float = DEFAULT_TIMEOUT):
        self.command = resolve_command(command)
        self.timeout = timeout
        self.stats = {"queries": 0, "sat": 0, "unsat": 0, "unknown": 0,
                      "timeouts": 0, "restarts": 0, "time": 0.0}
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()

    def __enter__(self) -> "SolverClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as e:
            raise SolverUnavailableError(f"cannot start solver {self.command}: {e}") from e
        self._lines = queue.Queue()

        def _read(proc, out):
            for line in proc.stdout:
                out.put(line.rstrip("\n"))
            out.put(None)

        threading.Thread(target=_read, args=(self._proc, self._lines), daemon=True).start()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        return self._proc

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
            self._proc = None

    def _restart(self) -> None:
        self.stats["restarts"] += 1
        self.close()

    def _script(self, decls: Iterable[str], facts: Iterable[str], budget: float) -> str:
        ms = max(1, int(budget * 1000))
        parts = ["(reset)", f"(set-option :timeout {ms})", "(set-logic QF_NRA)"]
        parts.extend(f"(declare-const {v} Real)" for v in sorted(set(decls)))
        parts.extend(f"(assert {f})" for f in facts)
        parts.append("(check-sat)")
        parts.append(f'(echo "{_SENTINEL}")')
        return "\n".join(parts) + "\n"

    def _write(self, text: str) -> None:
        proc = self._ensure()
        try:
            proc.stdin.write(text)
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            self._restart()
            raise SolverUnavailableError(f"solver process died: {e}") from e

    def _read_result(self, budget: float) -> Result:
        verdict: Result | None = None
        error: str | None = None
        # grace past the solver-side soft timeout before declaring a wedge
        deadline = time.monotonic() + budget * 1.25 + 5.0
        while True:
            try:
                line = self._lines.get(timeout=max(0.01, deadline - time.monotonic()))
            except queue.Empty:
                raise _Wedged()
            if line is None:
                self._restart()
                raise SolverUnavailableError("solver process closed its output")
            line = line.strip()
            if line == _SENTINEL:
                break
            if line in ("sat", "unsat", "unknown"):
                verdict = Result(line)
            elif line.startswith("(error"):
                error = line
        if error is not None:
            raise SolverError(f"solver reported: {error}")
        if verdict is None:
            raise SolverError("solver produced no verdict")
        if verdict is Result.UNKNOWN:
            self.stats["timeouts"] += 1
        return verdict

    def _run_script(self, script: str, budget: float) -> Result:
        """One script, one verdict; one retry on a fresh process if wedged."""
        for attempt in (0, 1):
            try:
                self._write(script)
                return self._read_result(budget)
            except _Wedged:
                self.stats["timeouts"] += 1
                self._restart()
        return Result.UNKNOWN

    def check_sat(self, decls: Iterable[str], facts: Iterable[str],
                  timeout: float | None = None) -> Result:
        budget = timeout if timeout is not None else self.timeout
        t0 = time.monotonic()
        res = self._run_script(self._script(decls, facts, budget), budget)
        self.stats["queries"] += 1
        self.stats[res.value] += 1
        self.stats["time"] += time.monotonic() - t0
        return res

    def check_sat_many(self, groups: Sequence[tuple[Iterable[str], Iterable[str]]],
                       pipeline: int = 64, timeout: float | None = None) -> list[Result]:
        """Feasibility of many independent (decls, facts) groups, pipelined.

        A wedged process invalidates the unanswered tail of its chunk; those
        scripts are re-issued individually so each still gets two attempts.
        """
        budget = timeout if timeout is not None else self.timeout
        scripts = [self._script(d, f, budget) for d, f in groups]
        out: list[Result] = []
        t0 = time.monotonic()
        k = 0
        while k < len(scripts):
            end = min(k + pipeline, len(scripts))
            try:
                self._write("".join(scripts[k:end]))
                while k < end:
                    res = self._read_result(budget)
                    self.stats["queries"] += 1
                    self.stats[res.value] += 1
                    out.append(res)
                    k += 1
            except _Wedged:
                self.stats["timeouts"] += 1
                self._restart()
                res = self._run_script(scripts[k], budget)
                self.stats["queries"] += 1
                self.stats[res.value] += 1
                out.append(res)
                k += 1
        self.stats["time"] += time.monotonic() - t0
        return out

    def prune_interval(self, decls: Iterable[str], facts: Sequence[str], var: str,
                       box: Interval, rel_tol: float = PRUNE_REL_TOL,
                       timeout: float | None = None) -> Interval:
        """Shrink [lo, hi] toward the feasible set of `var` under the facts.

        Sound: only regions proved infeasible are cut. Each endpoint first
        gets a cheap probe; bisection runs only when the probe shows slack.
        """
        decls = sorted(set(decls) | {var})
        lo, hi = box.lo, box.hi
        if not (lo < hi and hi - lo < float("inf")):
            return box
        width = hi - lo
        tol = width * rel_tol

        def feasible(a: float, b: float) -> bool:
            extra = [f"(<= {smt_real(a)} {var})", f"(<= {var} {smt_real(b)})"]
            return self.check_sat(decls, list(facts) + extra,
                                  timeout=timeout) is not Result.UNSAT

        new_lo = lo
        if not feasible(lo, lo + tol):
            a, b = lo, hi
            while b - a > tol:
                m = a + (b - a) / 2.0
                if feasible(a, m):
                    b = m
                else:
                    a = m
            new_lo = a
        new_hi = hi
        if not feasible(hi - tol, hi):
            a, b = max(new_lo, lo), hi
            while b - a > tol:
                m = a + (b - a) / 2.0
                if feasible(m, b):
                    a = m
                else:
                    b = m
            new_hi = b
        if new_hi < new_lo:
            new_hi = new_lo
        return Interval(new_lo, new_hi)
