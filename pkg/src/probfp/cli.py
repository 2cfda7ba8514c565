"""Command-line front end.

Analyzes one program file (exit codes: 0 ok, 1 usage, 2 parse error,
3 analysis error, 4 solver error), or every ``*.txt`` / ``*.sexp`` file
in a directory, emitting a summary table.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import (AnalysisConfig, AnalysisError, AnalysisResult, Program,
                       analyze, run_samples)
from .formats import get_format
from .parser import ParseError, parse_program, parse_sexpr_benchmark
from .smt import SolverError, SolverUnavailableError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_ANALYSIS = 3
EXIT_SOLVER = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_arg_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="probfp",
                 description="Probabilistic range and roundoff-error "
                             "analysis of floating-point expressions.")
    ap.add_argument("path", help="program file, or a directory of programs")
    ap.add_argument("--precision", default="single",
                    help="half | single | double | custom:p,emin,emax")
    ap.add_argument("--intervals", type=int, default=50,
                    help="focal elements per discretization (default 50)")
    ap.add_argument("--confidence", type=float, default=0.99,
                    help="confidence level for the error bound (default 0.99)")
    ap.add_argument("--solver-cmd", default=None,
                    help="SMT solver command reading SMT-LIB 2 on stdin")
    ap.add_argument("--solver-timeout", type=float, default=60.0,
                    help="per-query solver timeout in seconds")
    ap.add_argument("--optimizer-cmd", default=None,
                    help="external bound maximizer (JSON request on stdin)")
    ap.add_argument("--mc", type=int, default=0, metavar="N",
                    help="validate with N Monte-Carlo samples")
    ap.add_argument("--seed", type=int, default=0, help="sampling seed")
    ap.add_argument("--out", default=None,
                    help="write the JSON report (or corpus table) here")
    ap.add_argument("--export-pbox", default=None, metavar="CSV",
                    help="write the output p-box as x,cdf_lo,cdf_hi")
    ap.add_argument("--export-density", default=None, metavar="CSV",
                    help="write the output rounding-error density as t,density")
    ap.add_argument("--exact-constants", action="store_true",
                    help="treat program constants as exact reals")
    ap.add_argument("--error-model", default="auto",
                    choices=["auto", "exact", "hp", "typical", "interval"],
                    help="rounding-error distribution selection")
    ap.add_argument("--jobs", type=int, default=0,
                    help="parallel workers for directory runs "
                         "(default: cpu count)")
    return ap


def config_from_args(args: argparse.Namespace) -> AnalysisConfig:
    try:
        fmt = get_format(args.precision)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    if args.intervals < 2:
        raise _UsageError("--intervals must be at least 2")
    if not 0.0 < args.confidence <= 1.0:
        raise _UsageError("--confidence must be in (0, 1]")
    return AnalysisConfig(fmt=fmt, n_intervals=args.intervals,
                          confidence=args.confidence,
                          solver_cmd=args.solver_cmd,
                          solver_timeout=args.solver_timeout,
                          optimizer_cmd=args.optimizer_cmd,
                          exact_constants=args.exact_constants,
                          error_model=args.error_model)


class _UsageError(ValueError):
    pass


def load_program(path: Path) -> Program:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("(") or path.suffix in (".sexp", ".fpcore"):
        return parse_sexpr_benchmark(text, name=path.stem)
    return parse_program(text, name=path.stem)


def _csv_text(header: list[str], columns: list[np.ndarray]) -> str:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def export_pbox(result: AnalysisResult, mc_values: np.ndarray | None) -> str:
    grid = result.pbox.grid
    lo, hi = result.pbox.cdf_bounds(grid)
    header = ["x", "cdf_lo", "cdf_hi"]
    cols = [grid, lo, hi]
    if mc_values is not None:
        header.append("empirical_cdf")
        cols.append(np.searchsorted(np.sort(mc_values), grid, side="right")
                    / len(mc_values))
    return _csv_text(header, cols)


def export_density(result: AnalysisResult,
                   mc_rel_errors: np.ndarray | None) -> str:
    root = result.nodes[-1]
    err = root.errdist
    if err is not None:
        grid, dens = err.grid, err.density_values
    else:  # interval fallback: no density claim, export the flat envelope
        grid = np.linspace(-1.0, 1.0, 512)
        dens = np.full_like(grid, 0.5)
    header = ["t", "density"]
    cols = [grid, dens]
    if mc_rel_errors is not None:
        hist, _ = np.histogram(mc_rel_errors, bins=_grid_edges(grid),
                               density=True)
        header.append("empirical_density")
        cols.append(np.append(hist, hist[-1]))
    return _csv_text(header, cols)


def _grid_edges(grid: np.ndarray) -> np.ndarray:
    mids = 0.5 * (grid[1:] + grid[:-1])
    return np.concatenate([[grid[0]], mids, [grid[-1]]])


def _mc_block(program: Program, cfg: AnalysisConfig, result: AnalysisResult,
              n: int, seed: int):
    computed, errors = run_samples(program, cfg.fmt, n, seed,
                                   exact_constants=cfg.exact_constants)
    exceed = float(np.mean(errors > result.error_bound))
    block = {
        "samples": n,
        "seed": seed,
        "max_error": float(errors.max()),
        "mean_error": float(errors.mean()),
        "fraction_exceeding_bound": exceed,
        "values_min": float(computed.min()),
        "values_max": float(computed.max()),
    }
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(computed != 0.0,
                       errors / np.abs(computed) / cfg.fmt.u, 0.0)
    return block, computed, rel


def analyze_file(path: Path, args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    program = load_program(path)
    result = analyze(program, cfg)
    report = result.report()
    report["file"] = str(path)
    mc_values = mc_rel = None
    if args.mc > 0:
        block, mc_values, mc_rel = _mc_block(program, cfg, result,
                                             args.mc, args.seed)
        report["mc"] = block
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.export_pbox:
        Path(args.export_pbox).write_text(export_pbox(result, mc_values),
                                          encoding="utf-8")
    if args.export_density:
        Path(args.export_density).write_text(export_density(result, mc_rel),
                                             encoding="utf-8")
    return EXIT_OK


# ------------------------------------------------------------- corpus runner

def _corpus_worker(path_text: str, args_dict: dict) -> dict:
    args = argparse.Namespace(**args_dict)
    path = Path(path_text)
    row = {"benchmark": path.stem, "error_bound": math.nan,
           "worst_case": math.nan, "seconds": 0.0, "status": "ok"}
    start = time.perf_counter()
    try:
        cfg = config_from_args(args)
        program = load_program(path)
        result = analyze(program, cfg)
        row["error_bound"] = result.error_bound
        row["worst_case"] = result.worst_case_bound
    except ParseError as exc:
        row["status"] = f"failed: parse: {exc}"
    except AnalysisError as exc:
        row["status"] = f"failed: analysis: {exc}"
    except (SolverError, SolverUnavailableError) as exc:
        row["status"] = f"failed: solver: {exc}"
    row["seconds"] = time.perf_counter() - start
    return row


def _format_corpus_table(rows: list[dict], as_csv: bool) -> str:
    if as_csv:
        lines = ["benchmark,error_bound,worst_case,seconds,status"]
        for r in rows:
            lines.append(f"{r['benchmark']},{r['error_bound']:.6e},"
                         f"{r['worst_case']:.6e},{r['seconds']:.2f},"
                         f"\"{r['status']}\"")
        return "\n".join(lines) + "\n"
    header = (f"| {'benchmark':<14} | {'error_bound':>12} | "
              f"{'worst_case':>12} | {'seconds':>8} | status |")
    sep = f"|{'-' * 16}|{'-' * 14}|{'-' * 14}|{'-' * 10}|--------|"
    lines = [header, sep]
    for r in rows:
        lines.append(f"| {r['benchmark']:<14} | {r['error_bound']:>12.4e} | "
                     f"{r['worst_case']:>12.4e} | {r['seconds']:>8.1f} | "
                     f"{r['status']} |")
    return "\n".join(lines) + "\n"


def corpus_run(directory: Path, args: argparse.Namespace) -> int:
    config_from_args(args)  # validate flags before any work
    files = sorted(p for p in directory.iterdir()
                   if p.suffix in (".txt", ".sexp", ".fpcore"))
    args_dict = vars(args)
    jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
    jobs = min(jobs, max(len(files), 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_corpus_worker, [str(p) for p in files],
                                 [args_dict] * len(files)))
    else:
        rows = [_corpus_worker(str(p), args_dict) for p in files]
    as_csv = bool(args.out and args.out.endswith(".csv"))
    text = _format_corpus_table(rows, as_csv)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    ap = build_arg_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    path = Path(args.path)
    try:
        if path.is_dir():
            return corpus_run(path, args)
        if not path.exists():
            sys.stderr.write(f"probfp: error: no such file: {path}\n")
            return EXIT_USAGE
        return analyze_file(path, args)
    except _UsageError as exc:
        sys.stderr.write(f"probfp: error: {exc}\n")
        return EXIT_USAGE
    except ParseError as exc:
        sys.stderr.write(f"probfp: parse error: {exc}\n")
        return EXIT_PARSE
    except (SolverError, SolverUnavailableError) as exc:
        sys.stderr.write(f"probfp: solver error: {exc}\n")
        return EXIT_SOLVER
    except AnalysisError as exc:
        cause = exc.__cause__
        if isinstance(cause, (SolverError, SolverUnavailableError)):
            sys.stderr.write(f"probfp: solver error: {exc}\n")
            return EXIT_SOLVER
        sys.stderr.write(f"probfp: analysis error: {exc}\n")
        return EXIT_ANALYSIS
    except OSError as exc:
        sys.stderr.write(f"probfp: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
