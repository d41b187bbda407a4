"""Command-line driver.

Subcommands: ``analyze``, ``prove``, ``check``, ``run``, ``sample``.
stdout carries data, stderr carries diagnostics.  Exit codes: 0 success,
1 parse or SSA error, 2 analysis/runtime error, 3 rejected certificate
or failed sample check, 64 usage error.  ``PAA_THRESHOLD`` supplies the
default reform threshold; the ``--threshold`` flag wins.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional

from . import report as report_mod
from .analysis import AnalysisError, analyze
from .domain import MAX_UNION, WEIGHTED, ITERATED, LITERAL, AnalysisConfig, VarName
from .pcc import check_certificate, export_certificate
from .semantics import (
    ANNOTATED, CONCRETE, InterpretError, RunConfig, chase_target, check_runs,
    interpret,
)
from .ssa import has_errors, validate_ssa
from .syntax import ParseError, parse_file

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ANALYSIS = 2
EXIT_REJECTED = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _env_threshold() -> float:
    raw = os.environ.get("PAA_THRESHOLD")
    if raw is None:
        return 0.5
    try:
        value = float(raw)
    except ValueError:
        return 0.5
    return value if 0.0 <= value <= 1.0 else 0.5


def _add_analysis_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--threshold", type=float, default=None,
                     help="reaching-probability cutoff for reform/run (default 0.5, "
                          "or PAA_THRESHOLD)")
    sub.add_argument("--if-merge", choices=["weighted", "max-union"],
                     default="weighted", help="how branch states combine")
    sub.add_argument("--while-mode", choices=["iterated", "literal"],
                     default="iterated", help="loop body treatment")
    sub.add_argument("--lenient-md", action="store_true",
                     help="degrade bad md premises to warnings")
    sub.add_argument("--format", choices=["text", "structured"], default="text",
                     help="report rendering on stdout")


def _config(args) -> AnalysisConfig:
    threshold = args.threshold if args.threshold is not None else _env_threshold()
    return AnalysisConfig(
        threshold=threshold,
        if_merge=MAX_UNION if args.if_merge == "max-union" else WEIGHTED,
        while_mode=LITERAL if args.while_mode == "literal" else ITERATED,
        strict_md=not args.lenient_md,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paa",
                     description="Probabilistic alias analysis for SSA-DisLang")
    commands = parser.add_subparsers(dest="command", required=True)

    p_analyze = commands.add_parser("analyze", help="analyze a program and print a report")
    p_analyze.add_argument("file")
    p_analyze.add_argument("--report-dir", default=None,
                           help="also write CSV and figure files here")
    p_analyze.add_argument("--timing", action="store_true",
                           help="include wall-clock timing (breaks byte determinism)")
    _add_analysis_flags(p_analyze)

    p_prove = commands.add_parser("prove", help="analyze and export a certificate")
    p_prove.add_argument("file")
    p_prove.add_argument("-o", "--output", required=True, help="certificate path")
    _add_analysis_flags(p_prove)

    p_check = commands.add_parser("check", help="re-verify a certificate")
    p_check.add_argument("file")
    p_check.add_argument("cert")
    _add_analysis_flags(p_check)

    p_run = commands.add_parser("run", help="interpret a program once")
    p_run.add_argument("file")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--max-steps", type=int, default=10 ** 6)
    p_run.add_argument("--branch-mode", choices=["annotated", "concrete"],
                       default="annotated")
    _add_analysis_flags(p_run)

    p_sample = commands.add_parser("sample",
                                   help="sample seeded runs and check conformance")
    p_sample.add_argument("file")
    p_sample.add_argument("-n", "--runs", type=int, default=100)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--expect", type=float, default=None, metavar="TOL",
                          help="require |frequency - analyzed p| <= TOL for "
                               "variable targets")
    p_sample.add_argument("--report-dir", default=None,
                          help="also write CSV and figure files here")
    _add_analysis_flags(p_sample)
    return parser


def _load(path: str):
    """Parse and SSA-validate; returns (program, diagnostics) or an exit code."""
    try:
        program = parse_file(path)
    except ParseError as exc:
        sys.stderr.write(str(exc) + "\n")
        return None, EXIT_INPUT
    except OSError as exc:
        sys.stderr.write(f"{path}: {exc.strerror or exc}\n")
        return None, EXIT_INPUT
    diags = validate_ssa(program)
    if has_errors(diags):
        for d in diags:
            sys.stderr.write(f"{path}:{d}\n")
        return None, EXIT_INPUT
    return (program, diags), EXIT_OK


def cmd_analyze(args) -> int:
    loaded, code = _load(args.file)
    if loaded is None:
        return code
    program, diags = loaded
    cfg = _config(args)
    timing = None
    try:
        if args.timing:
            started = time.perf_counter()
            result = analyze(program, cfg)
            timing = {"analyze_s": time.perf_counter() - started}
        else:
            result = analyze(program, cfg)
    except AnalysisError as exc:
        sys.stderr.write(f"{args.file}:{exc}\n")
        return EXIT_ANALYSIS
    doc = report_mod.build_report(args.file, program, cfg, diags, result, timing)
    if args.format == "structured":
        sys.stdout.write(report_mod.render_structured(doc))
    else:
        sys.stdout.write(report_mod.render_text(doc))
    if args.report_dir:
        for path in report_mod.write_report_dir(doc, args.report_dir):
            sys.stderr.write(f"wrote {path}\n")
    return EXIT_OK


def cmd_prove(args) -> int:
    loaded, code = _load(args.file)
    if loaded is None:
        return code
    program, _ = loaded
    cfg = _config(args)
    try:
        result = analyze(program, cfg)
    except AnalysisError as exc:
        sys.stderr.write(f"{args.file}:{exc}\n")
        return EXIT_ANALYSIS
    cert = export_certificate(result, program, cfg)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(cert)
    sys.stderr.write(f"wrote certificate {args.output}\n")
    return EXIT_OK


def cmd_check(args) -> int:
    loaded, code = _load(args.file)
    if loaded is None:
        return code
    program, _ = loaded
    cfg = _config(args)
    try:
        with open(args.cert, encoding="utf-8") as fh:
            cert = fh.read()
    except OSError as exc:
        sys.stderr.write(f"{args.cert}: {exc.strerror or exc}\n")
        return EXIT_INPUT
    verdict = check_certificate(cert, program, cfg)
    if verdict.accepted:
        sys.stdout.write("accepted\n")
        return EXIT_OK
    sys.stderr.write(f"{verdict}\n")
    return EXIT_REJECTED


def cmd_run(args) -> int:
    loaded, code = _load(args.file)
    if loaded is None:
        return code
    program, _ = loaded
    rc = RunConfig(seed=args.seed, max_steps=args.max_steps,
                   branch_mode=CONCRETE if args.branch_mode == "concrete" else ANNOTATED)
    try:
        memory = interpret(program, rc)
    except InterpretError as exc:
        sys.stderr.write(f"{args.file}:{exc}\n")
        return EXIT_ANALYSIS
    if args.format == "structured":
        doc = {
            "command": "run",
            "file": args.file,
            "seed": args.seed,
            "env": {str(k): str(v) for k, v in memory.env_sorted()},
            "store": {str(k): str(v) for k, v in memory.store_sorted()},
        }
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        lines = [f"seed {args.seed}", "environment:"]
        lines += [f"  {k} = {v}" for k, v in memory.env_sorted()] or ["  (empty)"]
        lines.append("memory:")
        lines += [f"  {k} = {v}" for k, v in memory.store_sorted()] or ["  (empty)"]
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _expectation(final, dist, tolerance: float) -> dict:
    checks = []
    ok = True
    for key, pairs in final.items_sorted():
        if not isinstance(key, VarName):
            continue
        for pair in pairs:
            resolved = chase_target(pair.target, final)
            if resolved is None:
                continue
            freq = dist.frequency(str(key), str(resolved))
            within = abs(freq - pair.p) <= tolerance
            ok = ok and within
            checks.append({
                "key": str(key),
                "target": str(resolved),
                "analyzed": repr(pair.p),
                "empirical": freq,
                "ok": within,
            })
    return {"tolerance": repr(tolerance), "ok": ok, "checks": checks}


def cmd_sample(args) -> int:
    loaded, code = _load(args.file)
    if loaded is None:
        return code
    program, _ = loaded
    cfg = _config(args)
    try:
        result = analyze(program, cfg)
    except AnalysisError as exc:
        sys.stderr.write(f"{args.file}:{exc}\n")
        return EXIT_ANALYSIS
    if args.runs < 1:
        sys.stderr.write("sample size must be at least 1\n")
        return EXIT_USAGE
    dist, violations = check_runs(program, result.final, args.runs, args.seed)
    expectation = None
    if args.expect is not None:
        expectation = _expectation(result.final, dist, args.expect)
    doc = report_mod.build_sample_report(args.file, program, cfg, result.final,
                                         dist, violations, expectation)
    if args.format == "structured":
        sys.stdout.write(report_mod.render_structured(doc))
    else:
        sys.stdout.write(report_mod.render_sample_text(doc))
    if args.report_dir:
        for path in report_mod.write_report_dir(doc, args.report_dir):
            sys.stderr.write(f"wrote {path}\n")
    failed = bool(violations) or (expectation is not None and not expectation["ok"])
    return EXIT_REJECTED if failed else EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "analyze": cmd_analyze,
        "prove": cmd_prove,
        "check": cmd_check,
        "run": cmd_run,
        "sample": cmd_sample,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
