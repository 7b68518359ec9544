"""Command-line entry point: ``acausal check|solve|sweep <model-file>``.

Exit status: 0 success, 1 model or structural error, 2 usage error,
3 solver failure (non-convergence, singular Jacobian, evaluation error).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import TextIO

from .model import FlatSystem, ModelError, alias_eliminate, dump, flatten, structural_check
from .modelfile import ModelDocument, load_model
from .solve import (
    EvaluationError, SingularJacobianError, Solution, SweepError,
    newton_solve, sweep,
)

EXIT_OK = 0
EXIT_MODEL = 1
EXIT_USAGE = 2
EXIT_SOLVE = 3


def _load(path: str, err: TextIO, literal_q2: bool | None = None) -> tuple[ModelDocument, FlatSystem] | None:
    try:
        doc = load_model(path)
        comps, sets = doc.build(literal_q2)
        fs = alias_eliminate(flatten(comps, sets))
    except (OSError, ModelError) as exc:
        print(f"error: {exc}", file=err)
        return None
    return doc, fs


def max_imbalance(fs: FlatSystem, values: dict[str, float]) -> float:
    """Largest |sum of a through variable| over all connect sets."""
    worst = 0.0
    for cs in fs.connect_sets:
        for tv in cs.connector.through:
            worst = max(worst, abs(sum(values[n.qualified(tv.name)] for n in cs.nodes)))
    return worst


def variable_records(fs: FlatSystem, sol: Solution, time: float | None = None):
    for v in fs.variables:
        rec = {"record": "variable", "path": v.name, "value": sol.values[v.name],
               "unit": v.unit, "role": str(v.role)}
        if time is not None:
            rec["time"] = time
        yield rec


def summary_record(fs: FlatSystem, sol: Solution, time: float | None = None) -> dict:
    rec = {"record": "summary", "converged": sol.converged, "residual_norm": sol.residual_norm,
           "iterations": sol.iterations, "max_imbalance": max_imbalance(fs, sol.values)}
    if time is not None:
        rec["time"] = time
    return rec


def write_report(fs: FlatSystem, sol: Solution, fmt: str, out: TextIO, time: float | None = None) -> None:
    if fmt == "records":
        for rec in variable_records(fs, sol, time):
            out.write(json.dumps(rec) + "\n")
        out.write(json.dumps(summary_record(fs, sol, time)) + "\n")
        return
    if time is not None:
        out.write(f"== t = {time:g}\n")
    width = max(len(v.name) for v in fs.variables)
    out.write(f"{'path':<{width}}  {'value':>18}  {'unit':<10}  role\n")
    for v in fs.variables:
        out.write(f"{v.name:<{width}}  {sol.values[v.name]:>18.10g}  {v.unit:<10}  {v.role}\n")
    out.write(f"residual norm (inf): {sol.residual_norm:.3e}\n")
    out.write(f"iterations: {sol.iterations}\n")
    out.write(f"max connect-set imbalance: {max_imbalance(fs, sol.values):.3e}\n")


def cmd_check(path: str, dump_system: bool = False, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    loaded = _load(path, err)
    if loaded is None:
        return EXIT_MODEL
    _, fs = loaded
    report = structural_check(fs)
    out.write(report.format() + "\n")
    if dump_system:
        out.write(dump(fs))
    return EXIT_OK if report.ok else EXIT_MODEL


def _failure(exc: Exception, err: TextIO, time: float | None = None) -> int:
    where = "" if time is None else f" at t = {time:g}"
    print(f"error: solve failed{where}: {exc}", file=err)
    return EXIT_SOLVE


def cmd_solve(path: str, fmt: str = "table", tol: float | None = None, literal_q2: bool = False,
              trace: bool = False, time: float | None = None,
              out: TextIO | None = None, err: TextIO | None = None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    loaded = _load(path, err, literal_q2 or None)
    if loaded is None:
        return EXIT_MODEL
    doc, fs = loaded
    report = structural_check(fs)
    if not report.ok:
        err.write(report.format() + "\n")
        return EXIT_MODEL
    params = {} if time is None else {"time": time}
    try:
        opts = doc.solve_options(tol)
        sol = newton_solve(fs, opts=opts, params=params)
    except (EvaluationError, SingularJacobianError, ValueError) as exc:
        return _failure(exc, err, time)
    if not sol.converged:
        print(f"error: no convergence ({sol.message})", file=err)
        err.write(sol.format_trace() + "\n")
        return EXIT_SOLVE
    if trace:
        err.write(sol.format_trace() + "\n")
    write_report(fs, sol, fmt, out)
    return EXIT_OK


def cmd_sweep(path: str, fmt: str = "table", tol: float | None = None,
              out: TextIO | None = None, err: TextIO | None = None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    loaded = _load(path, err)
    if loaded is None:
        return EXIT_MODEL
    doc, fs = loaded
    if doc.sweep is None:
        print(f"error: {doc.source}: model has no sweep block", file=err)
        return EXIT_MODEL
    report = structural_check(fs)
    if not report.ok:
        err.write(report.format() + "\n")
        return EXIT_MODEL
    counts: list[tuple[float, int]] = []

    def emit(t, sol):
        write_report(fs, sol, fmt, out, time=t)
        counts.append((t, sol.iterations))

    try:
        sweep(fs, doc.sweep.schedule(), doc.solve_options(tol), on_point=emit)
    except SweepError as exc:
        print(f"error: sweep failed at t = {exc.time:g}: {exc.solution.message}", file=err)
        err.write(exc.solution.format_trace() + "\n")
        return EXIT_SOLVE
    except (EvaluationError, SingularJacobianError, ValueError, ModelError) as exc:
        return _failure(exc, err, counts[-1][0] if counts else None)
    if fmt == "records":
        out.write(json.dumps({"record": "sweep", "points": len(counts),
                              "iterations": [n for _, n in counts]}) + "\n")
    else:
        out.write(f"== sweep: {len(counts)} points\n")
        for t, n in counts:
            out.write(f"t = {t:<10g} iterations = {n}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acausal", description="Check, solve and sweep acausal model files.")
    sub = ap.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", help="structural check (counts and matching)")
    c.add_argument("file")
    c.add_argument("--dump", action="store_true", help="also print the flattened system")
    s = sub.add_parser("solve", help="steady solve")
    s.add_argument("file")
    s.add_argument("--format", choices=("table", "records"), default="table")
    s.add_argument("--tol", type=float)
    s.add_argument("--literal-q2", action="store_true", help="use q^2 instead of q|q| in losses")
    s.add_argument("--trace", action="store_true", help="print the Newton trace to stderr")
    s.add_argument("--time", type=float, help="value of the time parameter (default 0)")
    w = sub.add_parser("sweep", help="warm-started solves over the sweep grid")
    w.add_argument("file")
    w.add_argument("--format", choices=("table", "records"), default="table")
    w.add_argument("--tol", type=float)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args.file, args.dump)
        if args.command == "solve":
            return cmd_solve(args.file, args.format, args.tol, args.literal_q2, args.trace, args.time)
        return cmd_sweep(args.file, args.format, args.tol)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
