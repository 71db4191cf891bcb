"""Verdict composition and the hunting-party portfolio.

Four analyzers run over one program: a sound verifier (join plus list
abstraction) and three exact-state hunters, two depth-first with step
budgets and one breadth-first.  The composition rules:

  * the verifier saying safe settles the program as correct;
  * any hunter finding an error settles it as incorrect, with that
    hunter's trace;
  * the breadth-first hunter finishing without an error also settles the
    program as correct (it explored everything);
  * a verifier error is ignored (it may be an abstraction artefact), a
    depth-first hunter's "safe" is ignored (its search was bounded);
  * anything else is unknown.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Optional

from .engine import AnalysisConfig, AnalysisResult, ErrorReport, analyze
from .mil import Program
from .smg import SPC

DEFAULT_DFS_BUDGETS = (200, 900)


@dataclass
class Verdict:
    kind: str  # "TRUE" | "FALSE" | "UNKNOWN"
    provenance: str = ""
    reports: tuple[ErrorReport, ...] = ()

    @property
    def exit_code(self) -> int:
        return {"TRUE": 0, "FALSE": 1, "UNKNOWN": 2}[self.kind]


def member_configs(budgets: tuple[int, int] = DEFAULT_DFS_BUDGETS,
                   ptr_size: int = 8,
                   len_thresholds=(2, 2, 3)) -> dict[str, AnalysisConfig]:
    """The four portfolio members keyed by name."""
    return {
        "verifier": AnalysisConfig(mode="verifier", search="bfs",
                                   ptr_size=ptr_size,
                                   len_thresholds=len_thresholds),
        f"dfs{budgets[0]}": AnalysisConfig(mode="hunter", search="dfs",
                                           step_budget=budgets[0],
                                           join_at="never",
                                           ptr_size=ptr_size),
        f"dfs{budgets[1]}": AnalysisConfig(mode="hunter", search="dfs",
                                           step_budget=budgets[1],
                                           join_at="never",
                                           ptr_size=ptr_size),
        "bfs": AnalysisConfig(mode="hunter", search="bfs",
                              join_at="never", ptr_size=ptr_size),
    }


def compose_verdicts(outcomes: dict[str, str],
                     reports: Optional[dict[str, tuple]] = None) -> Verdict:
    """Pure composition over finished member outcomes.

    ``outcomes`` maps member name ("verifier", "dfsN", "bfs") to "SAFE",
    "UNSAFE" or "UNKNOWN".  Hunters finding errors dominate, then the
    verifier's or the exhaustive breadth-first hunter's safety claim.
    """
    reports = reports or {}
    hunters = sorted(k for k in outcomes if k != "verifier")
    hunters.sort(key=lambda k: (0 if k.startswith("dfs") else 1, k))
    for h in hunters:
        if outcomes[h] == "UNSAFE":
            return Verdict("FALSE", provenance=h,
                           reports=tuple(reports.get(h, ())))
    if outcomes.get("verifier") == "SAFE":
        return Verdict("TRUE", provenance="verifier")
    if outcomes.get("bfs") == "SAFE":
        return Verdict("TRUE", provenance="bfs")
    return Verdict("UNKNOWN", provenance="portfolio")


def run_hunting_party(program: Program,
                      budgets: tuple[int, int] = DEFAULT_DFS_BUDGETS,
                      timeout: Optional[float] = 60.0,
                      ptr_size: int = 8,
                      len_thresholds=(2, 2, 3)) -> Verdict:
    """Run the members concurrently; the first decisive result cancels the
    rest.  Internal failures of a member degrade to UNKNOWN."""
    configs = member_configs(budgets, ptr_size, len_thresholds)
    cancels = {name: threading.Event() for name in configs}
    for name, cfg in configs.items():
        cfg.cancel_event = cancels[name]

    results: dict[str, AnalysisResult] = {}
    lock = threading.Lock()
    decisive = threading.Event()
    decision: list[Verdict] = []

    def cancel_all() -> None:
        for ev in cancels.values():
            ev.set()

    def decide_from(name: str, res: AnalysisResult) -> Optional[Verdict]:
        if name == "verifier" and res.verdict == "SAFE":
            return Verdict("TRUE", provenance="verifier")
        if name != "verifier" and res.verdict == "UNSAFE":
            return Verdict("FALSE", provenance=name,
                           reports=tuple(res.reports))
        if name == "bfs" and res.verdict == "SAFE":
            return Verdict("TRUE", provenance="bfs")
        return None

    def run(name: str) -> None:
        try:
            res = analyze(program, configs[name])
        except Exception as exc:  # degrade, never crash the party
            res = AnalysisResult("UNKNOWN", [], None, None,
                                 note=f"internal failure: {exc}")
        with lock:
            results[name] = res
            verdict = decide_from(name, res)
            if verdict is not None and not decision:
                decision.append(verdict)
                decisive.set()
                cancel_all()

    with ThreadPoolExecutor(max_workers=len(configs)) as pool:
        futures = [pool.submit(run, name) for name in configs]
        decisive.wait(timeout=timeout)
        cancel_all()
        wait(futures)

    if decision:
        return decision[0]
    outcomes = {name: results[name].verdict if name in results else "UNKNOWN"
                for name in configs}
    reps = {name: tuple(results[name].reports) for name in results}
    return compose_verdicts(outcomes, reps)


# ---------------------------------------------------------------------------
# fixpoint dump
# ---------------------------------------------------------------------------


def spc_to_json(c: SPC) -> dict:
    g = c.smg
    return {
        "ptr_size": g.ptr_size,
        "objects": {
            str(o): {
                "kind": lbl.kind.value, "size": lbl.size,
                "level": lbl.level, "valid": lbl.valid,
                "len": lbl.min_len if lbl.is_segment else None,
                "hfo": lbl.hfo if lbl.is_segment else None,
                "nfo": lbl.nfo if lbl.is_segment else None,
                "pfo": lbl.pfo,
            } for o, lbl in sorted(g.objects.items())
        },
        "values": {str(v): {"level": lv} for v, lv in sorted(g.values.items())},
        "H": [[o, of, {"kind": ty.kind.value, "size": ty.size}, v]
              for (o, of, ty), v in sorted(
                  g.hv.items(), key=lambda kv: (kv[0][0], kv[0][1],
                                                kv[0][2].size))],
        "P": [[v, of, tg.value, o]
              for v, (of, tg, o) in sorted(g.pt.items())],
        "vars": dict(sorted(c.vars.items())),
    }


def fixpoint_to_json(result: AnalysisResult) -> dict:
    blocks = result.cfg.program.blocks
    return {
        "verdict": result.verdict,
        "locations": {
            blocks[i].label: [spc_to_json(c) for c in states]
            for i, states in enumerate(result.fixpoint.states)
        },
    }


def dump_fixpoint(result: AnalysisResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fixpoint_to_json(result), fh, indent=2, sort_keys=True)
