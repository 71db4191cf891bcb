"""Command-line front end.

``smgverify PROGRAM.mil [options]`` analyses one program and exits with
0 for TRUE (safe), 1 for FALSE (a bug was found), 2 for UNKNOWN, 3 for
input errors, and 4 for internal errors.  Reports go to standard error in
the usual compiler format ``file:line: error: ...``.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .driver import Verdict, dump_fixpoint, run_hunting_party
from .dot import spc_to_dot
from .engine import AnalysisConfig, analyze
from .mil import MilError, parse_program
from .smg import SmgError

EXIT_TRUE = 0
EXIT_FALSE = 1
EXIT_UNKNOWN = 2
EXIT_INPUT_ERROR = 3
EXIT_INTERNAL_ERROR = 4


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="smgverify",
        description="memory-safety analysis for MIL pointer programs")
    ap.add_argument("file", help="program to analyse (.mil)")
    ap.add_argument("--mode", default="party",
                    help="verifier | dfs:N | bfs | party (default: party)")
    ap.add_argument("--dot-dir", metavar="DIR",
                    help="write one DOT file per fixpoint configuration")
    ap.add_argument("--dump-fixpoint", metavar="FILE",
                    help="write the fixpoint as JSON")
    ap.add_argument("--len-thr", default="2,2,3", metavar="C0,C1,C2",
                    help="abstraction length thresholds per cost")
    ap.add_argument("--join-at", default="loop",
                    choices=["loop", "block", "never"])
    ap.add_argument("--abstraction-at", default="loop",
                    choices=["loop", "block"])
    ap.add_argument("--ptr-size", type=int, default=8, choices=[4, 8])
    ap.add_argument("--timeout", type=float, default=60.0, metavar="SECONDS")
    return ap


def _single_config(mode: str, args) -> Optional[AnalysisConfig]:
    thr = tuple(int(t) for t in args.len_thr.split(","))
    if len(thr) != 3:
        raise ValueError("--len-thr wants three comma-separated numbers")
    if mode == "verifier":
        return AnalysisConfig(mode="verifier", search="bfs",
                              join_at=args.join_at,
                              abstraction_at=args.abstraction_at,
                              len_thresholds=thr, ptr_size=args.ptr_size)
    if mode == "bfs":
        return AnalysisConfig(mode="hunter", search="bfs", join_at="never",
                              ptr_size=args.ptr_size)
    if mode.startswith("dfs:"):
        return AnalysisConfig(mode="hunter", search="dfs", join_at="never",
                              step_budget=int(mode[4:]),
                              ptr_size=args.ptr_size)
    return None


def _emit_reports(verdict: Verdict, filename: str) -> None:
    for rep in verdict.reports:
        print(rep.gcc_style(filename), file=sys.stderr)
    if verdict.kind == "FALSE" and verdict.reports:
        trace = verdict.reports[0].trace
        if trace:
            print("trace:", file=sys.stderr)
            for line, text in trace:
                print(f"  {filename}:{line}: {text}", file=sys.stderr)


def _dump_artifacts(args, program) -> None:
    if not args.dot_dir and not args.dump_fixpoint:
        return
    cfg = _single_config("verifier", args)
    result = analyze(program, cfg)
    if args.dump_fixpoint:
        dump_fixpoint(result, args.dump_fixpoint)
    if args.dot_dir:
        os.makedirs(args.dot_dir, exist_ok=True)
        blocks = result.cfg.program.blocks
        for i, states in enumerate(result.fixpoint.states):
            for j, spc in enumerate(states):
                path = os.path.join(args.dot_dir,
                                    f"{blocks[i].label}_{j}.dot")
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(spc_to_dot(spc, f"{blocks[i].label}_{j}"))


def cli_main(argv: Optional[list[str]] = None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT_ERROR if exc.code not in (0, None) else 0

    try:
        with open(args.file, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"smgverify: cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        program = parse_program(text)
    except MilError as exc:
        print(f"{args.file}:{exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        thr = tuple(int(t) for t in args.len_thr.split(","))
        if len(thr) != 3:
            raise ValueError
    except ValueError:
        print("smgverify: --len-thr wants three comma-separated numbers",
              file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        if args.mode == "party":
            verdict = run_hunting_party(program, timeout=args.timeout,
                                        ptr_size=args.ptr_size,
                                        len_thresholds=thr)
        else:
            cfg = _single_config(args.mode, args)
            if cfg is None:
                print(f"smgverify: unknown mode {args.mode!r}",
                      file=sys.stderr)
                return EXIT_INPUT_ERROR
            result = analyze(program, cfg)
            kind = {"SAFE": "TRUE", "UNSAFE": "FALSE",
                    "UNKNOWN": "UNKNOWN"}[result.verdict]
            verdict = Verdict(kind, provenance=args.mode,
                              reports=tuple(result.reports))
        _dump_artifacts(args, program)
    except (SmgError, MilError) as exc:
        print(f"smgverify: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR
    except RecursionError as exc:
        print(f"smgverify: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR

    _emit_reports(verdict, args.file)
    print(verdict.kind)
    return verdict.exit_code


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
