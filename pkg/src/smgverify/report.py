"""Corpus report: run every benchmark, emit a results table and figures.

``smgverify-report CORPUS -o OUT`` analyses each ``<name>.mil`` whose
expected verdict sits next to it in ``<name>.expected`` (``TRUE``,
``FALSE:<kind>`` or ``UNKNOWN``), then writes ``results.csv`` plus two PNG
charts (verdict outcomes and per-program runtimes) into the output
directory.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .driver import run_hunting_party  # noqa: E402
from .mil import MilError, parse_program  # noqa: E402


@dataclass
class Row:
    name: str
    expected: str
    verdict: str
    provenance: str
    ok: bool
    seconds: float


def _expected_matches(expected: str, verdict: str, kinds: set[str]) -> bool:
    if expected.startswith("FALSE:"):
        want_kind = expected.split(":", 1)[1]
        return verdict == "FALSE" and want_kind in kinds
    return expected == verdict


def run_corpus(corpus_dir: str, timeout: float = 30.0) -> list[Row]:
    rows: list[Row] = []
    names = sorted(f[:-4] for f in os.listdir(corpus_dir)
                   if f.endswith(".mil"))
    for name in names:
        mil_path = os.path.join(corpus_dir, name + ".mil")
        exp_path = os.path.join(corpus_dir, name + ".expected")
        if not os.path.exists(exp_path):
            continue
        with open(exp_path, encoding="utf-8") as fh:
            expected = fh.read().strip()
        with open(mil_path, encoding="utf-8") as fh:
            text = fh.read()
        start = time.monotonic()
        try:
            program = parse_program(text)
            verdict = run_hunting_party(program, timeout=timeout)
            kind, provenance = verdict.kind, verdict.provenance
            kinds = {r.kind for r in verdict.reports}
        except MilError as exc:
            kind, provenance, kinds = "UNKNOWN", f"parse error: {exc}", set()
        elapsed = time.monotonic() - start
        rows.append(Row(name, expected, kind, provenance,
                        _expected_matches(expected, kind, kinds), elapsed))
    return rows


def write_csv(rows: list[Row], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "expected", "verdict", "provenance", "ok",
                    "seconds"])
        for r in rows:
            w.writerow([r.name, r.expected, r.verdict, r.provenance,
                        "yes" if r.ok else "no", f"{r.seconds:.3f}"])


def write_figures(rows: list[Row], out_dir: str) -> list[str]:
    paths = []

    counts: dict[str, int] = {}
    for r in rows:
        key = r.verdict + ("" if r.ok else " (wrong)")
        counts[key] = counts.get(key, 0) + 1
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted(counts)
    ax.bar(keys, [counts[k] for k in keys], color="#4878a8")
    ax.set_ylabel("programs")
    ax.set_title("portfolio verdicts on the corpus")
    fig.tight_layout()
    p = os.path.join(out_dir, "verdicts.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(8, max(3, 0.3 * len(rows))))
    names = [r.name for r in rows]
    ax.barh(names, [r.seconds for r in rows],
            color=["#5a9a68" if r.ok else "#b05050" for r in rows])
    ax.set_xlabel("seconds")
    ax.set_title("per-program analysis time")
    ax.invert_yaxis()
    fig.tight_layout()
    p = os.path.join(out_dir, "runtimes.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="smgverify-report",
        description="run a benchmark corpus and render a results report")
    ap.add_argument("corpus", help="directory with <name>.mil/.expected")
    ap.add_argument("-o", "--out", default="report",
                    help="output directory (default: report/)")
    ap.add_argument("--timeout", type=float, default=30.0)
    args = ap.parse_args(argv)

    if not os.path.isdir(args.corpus):
        print(f"smgverify-report: no such directory: {args.corpus}",
              file=sys.stderr)
        return 3
    os.makedirs(args.out, exist_ok=True)
    rows = run_corpus(args.corpus, timeout=args.timeout)
    csv_path = os.path.join(args.out, "results.csv")
    write_csv(rows, csv_path)
    figures = write_figures(rows, args.out)

    good = sum(r.ok for r in rows)
    print(f"{good}/{len(rows)} programs matched their expected verdict")
    print(f"wrote {csv_path}")
    for p in figures:
        print(f"wrote {p}")
    return 0 if good == len(rows) else 1


if __name__ == "__main__":
    sys.exit(main())
