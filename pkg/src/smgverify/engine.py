"""The abstract interpreter: instruction transfer and worklist fixpoint.

Programs execute over configurations (SPCs).  Every memory access first
materialises the addressed list segment, splitting into an empty and a
non-empty branch when the segment may be empty, so instructions only ever
touch concrete regions.  Conditions are decided by value identity, the
inequality prover, or offset comparison, and undecided ones fork with the
branch assumption applied.

The fixpoint keeps a set of configurations per basic-block entry.  In
verifier mode, loop heads garbage-collect, abstract, and then consolidate
the incoming configuration against the stored ones by entailment and join;
other blocks deduplicate by isomorphism.  Hunters run with abstraction off
and joining reduced to isomorphism, optionally under a step budget, and
report the first error found together with its trace.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Optional

from . import decide
from .abstraction import DEFAULT_LEN_THRESHOLDS, abstract_spc
from .join import FAILED, entails, isomorphic, join_spcs
from .mil import CFG, Instr, Program, build_cfg, print_instr
from .reinterp import read_value, write_value
from .smg import (
    FieldType,
    NULL_OBJECT,
    ObjLabel,
    SMG,
    SPC,
    Tg,
    ZERO,
    collect_garbage,
    empty_spc,
    materialise,
    remove_zero_segment,
)

ERROR_KINDS = (
    "NullDeref", "InvalidDeref", "OutOfBounds", "DoubleFree",
    "InvalidFree", "MemLeak", "OverlappingCopy",
)


@dataclass(frozen=True)
class ErrorReport:
    kind: str
    line: int
    message: str
    trace: tuple[tuple[int, str], ...] = ()

    def gcc_style(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}: error: {self.kind}: {self.message}"


@dataclass
class AnalysisConfig:
    mode: str = "verifier"  # "verifier" | "hunter"
    search: str = "bfs"     # "bfs" | "dfs"
    step_budget: Optional[int] = None   # per-path instruction budget (DFS)
    max_transfers: int = 500_000        # global instruction cap
    abstraction_at: str = "loop"        # "loop" | "block"
    join_at: str = "loop"               # "loop" | "block" | "never"
    len_thresholds: tuple[int, int, int] = DEFAULT_LEN_THRESHOLDS
    ptr_size: int = 8
    oracle_k: int = 3
    cancel_event: Optional[threading.Event] = None

    @property
    def is_hunter(self) -> bool:
        return self.mode == "hunter"


@dataclass
class FixpointState:
    """Stored configurations per basic-block entry."""

    states: list[list[SPC]]

    def at(self, label_index: int) -> list[SPC]:
        return self.states[label_index]


@dataclass
class AnalysisResult:
    verdict: str  # "SAFE" | "UNSAFE" | "UNKNOWN"
    reports: list[ErrorReport]
    fixpoint: FixpointState
    cfg: CFG
    truncated: bool = False
    transfers: int = 0
    note: str = ""


@dataclass
class _Step:
    """Outcome of one instruction on one configuration."""

    spc: SPC
    error: Optional[ErrorReport] = None
    jump: Optional[str] = None   # set by terminators
    halted: bool = False         # exit reached


class _Cancelled(Exception):
    pass


def _resolve_ty(ty: str, ptr_size: int) -> FieldType:
    if ty == "ptr":
        return FieldType.ptr(ptr_size)
    return FieldType.data(int(ty[4:]))


# ---------------------------------------------------------------------------
# value plumbing
# ---------------------------------------------------------------------------


def _read_var(c: SPC, x: str) -> tuple[SPC, int]:
    g, v = read_value(c.smg, c.vars[x], 0, c.smg.ptr_type)
    return SPC(g, dict(c.vars)), v


def _write_var(c: SPC, x: str, v: int) -> SPC:
    g = write_value(c.smg, c.vars[x], 0, c.smg.ptr_type, v)
    return SPC(g, dict(c.vars))


def _err(kind: str, ins: Instr, msg: str) -> ErrorReport:
    return ErrorReport(kind, ins.line, msg)


def _resolve_target(c: SPC, v: int, ins: Instr, mode: str = "deref"
                    ) -> list[_Step | tuple[SPC, int]]:
    """Chase ``v`` to a concrete target, materialising segments on the way.

    Returns (SPC, value) continuations and/or error steps; a 0+ segment
    yields both the removed-segment and the at-least-one continuation.
    ``mode`` selects the error discipline: "deref" reports bad targets,
    "free" maps them to free errors, "address" never errors (pointer
    arithmetic tolerates null, unknown, and freed targets).
    """
    g = c.smg
    trip = g.pt.get(v)
    if v == ZERO:
        if mode == "deref":
            return [_Step(c, _err("NullDeref", ins, "null dereference"))]
        return [(c, v)]
    if trip is None:
        if mode == "deref":
            return [_Step(c, _err("InvalidDeref", ins,
                                  "dereference of an unknown value"))]
        if mode == "free":
            return [_Step(c, _err("InvalidFree", ins,
                                  "free of an unknown value"))]
        return [(c, v)]
    of, tg, o = trip
    lbl = g.objects[o]
    if lbl.is_segment and tg in (Tg.FST, Tg.LST):
        out: list[_Step | tuple[SPC, int]] = []
        if lbl.min_len == 0:
            follow = lbl.nfo if tg is Tg.FST else lbl.pfo
            succ = g.hv[(o, follow, g.ptr_type)]
            removed = remove_zero_segment(g, o)
            out += _resolve_target(SPC(removed, dict(c.vars)), succ, ins,
                                   mode)
            bumped = g.copy()
            bumped.relabel(o, min_len=1)
            out += _resolve_target(SPC(bumped, dict(c.vars)), v, ins, mode)
            return out
        end = "front" if tg is Tg.FST else "back"
        g2, _ = materialise(g, o, end)
        return _resolve_target(SPC(g2, dict(c.vars)), v, ins, mode)
    if mode == "address":
        return [(c, v)]
    if o == NULL_OBJECT:
        if mode == "free":
            return [_Step(c, _err("InvalidFree", ins,
                                  "free of a null-based address"))]
        return [_Step(c, _err("NullDeref", ins, "null dereference"))]
    if not lbl.valid:
        if mode == "free":
            return [_Step(c, _err("DoubleFree", ins,
                                  "object was already freed"))]
        return [_Step(c, _err("InvalidDeref", ins,
                              "dereference of freed memory"))]
    if lbl.is_segment:
        return [_Step(c, _err("InvalidDeref", ins,
                              "dereference through a nested address"))]
    return [(c, v)]


def _leak_sweep(c: SPC, ins: Instr) -> tuple[SPC, Optional[ErrorReport]]:
    labels = dict(c.smg.objects)
    cleaned, removed = collect_garbage(c)
    leaked = [o for o in removed if labels[o].valid]
    if leaked:
        return cleaned, _err("MemLeak", ins,
                             f"{len(leaked)} allocated object(s) became "
                             "unreachable")
    return cleaned, None


def _find_or_add_address(g: SMG, of: int, tg: Tg, o: int) -> tuple[SMG, int]:
    a = g.find_address(of, tg, o)
    if a is not None:
        return g, a
    g = g.copy()
    level = g.objects[o].level + (1 if tg is Tg.ALL else 0)
    a = g.add_value(level)
    g.pt[a] = (of, tg, o)
    return g, a


# ---------------------------------------------------------------------------
# instruction transfer
# ---------------------------------------------------------------------------


def exec_instr(c: SPC, ins: Instr) -> list[_Step]:
    """All successor configurations of one instruction, errors attached.

    Terminators set ``jump``/``halted``; every successor has already been
    garbage-collected, with leaks reported on the step that caused them.
    """
    op = ins.op
    outs: list[_Step] = []

    if op in ("malloc", "calloc"):
        g = c.smg.copy()
        r = g.add_object(ObjLabel.region(ins.n))
        if op == "calloc":
            g.set_field(r, 0, FieldType.data(ins.n), ZERO)
        a = g.add_value(0)
        g.pt[a] = (0, Tg.REG, r)
        outs.append(_Step(_write_var(SPC(g, dict(c.vars)), ins.x, a)))

    elif op == "setnull":
        outs.append(_Step(_write_var(c, ins.x, ZERO)))

    elif op == "copy":
        c2, v = _read_var(c, ins.y)
        outs.append(_Step(_write_var(c2, ins.x, v)))

    elif op == "nondet":
        g = c.smg.copy()
        v = g.add_value(0)
        outs.append(_Step(_write_var(SPC(g, dict(c.vars)), ins.x, v)))

    elif op == "add":
        outs += _exec_add(c, ins)

    elif op == "load":
        c2, v = _read_var(c, ins.y)
        ty = _resolve_ty(ins.ty, c2.smg.ptr_size)
        for res in _resolve_target(c2, v, ins):
            if isinstance(res, _Step):
                outs.append(res)
                continue
            c3, v3 = res
            of_base, _, r = c3.smg.pt[v3]
            p = of_base + ins.of
            lbl = c3.smg.objects[r]
            if p < 0 or p + ty.size > lbl.size:
                outs.append(_Step(c3, _err("OutOfBounds", ins,
                                           f"read of {ty} at offset {p} in "
                                           f"an object of size {lbl.size}")))
                continue
            g4, val = read_value(c3.smg, r, p, ty)
            outs.append(_Step(_write_var(SPC(g4, dict(c3.vars)), ins.x, val)))

    elif op == "store":
        c2, v = _read_var(c, ins.x)
        ty = _resolve_ty(ins.ty, c2.smg.ptr_size)
        for res in _resolve_target(c2, v, ins):
            if isinstance(res, _Step):
                outs.append(res)
                continue
            c3, v3 = res
            of_base, _, r = c3.smg.pt[v3]
            p = of_base + ins.of
            lbl = c3.smg.objects[r]
            if p < 0 or p + ty.size > lbl.size:
                outs.append(_Step(c3, _err("OutOfBounds", ins,
                                           f"write of {ty} at offset {p} in "
                                           f"an object of size {lbl.size}")))
                continue
            c4, vy = _read_var(c3, ins.y)
            g5 = write_value(c4.smg, r, p, ty, vy)
            outs.append(_Step(SPC(g5, dict(c4.vars))))

    elif op == "free":
        outs += _exec_free(c, ins)

    elif op == "memset":
        c2, v = _read_var(c, ins.x)
        for res in _resolve_target(c2, v, ins):
            if isinstance(res, _Step):
                outs.append(res)
                continue
            c3, v3 = res
            of_base, _, r = c3.smg.pt[v3]
            p = of_base + ins.of
            lbl = c3.smg.objects[r]
            if p < 0 or p + ins.n > lbl.size:
                outs.append(_Step(c3, _err("OutOfBounds", ins,
                                           "memset beyond object bounds")))
                continue
            g4 = write_value(c3.smg, r, p, FieldType.data(ins.n), ZERO)
            outs.append(_Step(SPC(g4, dict(c3.vars))))

    elif op == "memcpy":
        outs += _exec_memcpy(c, ins)

    elif op == "branch":
        outs += _exec_branch(c, ins)

    elif op == "goto":
        outs.append(_Step(c, jump=ins.target))

    elif op == "exit":
        outs += _exec_exit(c, ins)

    else:  # pragma: no cover
        raise ValueError(op)

    final: list[_Step] = []
    for st in outs:
        if st.error is not None or st.halted:
            final.append(st)
            continue
        cleaned, leak = _leak_sweep(st.spc, ins)
        final.append(_Step(cleaned, leak, st.jump, st.halted))
    return final


def _add_offset(c: SPC, x: str, v: int, k: int) -> _Step:
    g = c.smg
    if v == ZERO and k == 0:
        return _Step(_write_var(c, x, ZERO))
    trip = g.pt.get(v)
    if trip is None:
        g2 = g.copy()
        fresh = g2.add_value(0)
        return _Step(_write_var(SPC(g2, dict(c.vars)), x, fresh))
    of, tg, o = trip
    g2, a = _find_or_add_address(g, of + k, tg, o)
    return _Step(_write_var(SPC(g2, dict(c.vars)), x, a))


def _exec_add(c: SPC, ins: Instr) -> list[_Step]:
    c2, v = _read_var(c, ins.y)
    g = c2.smg
    trip = g.pt.get(v)
    if trip is not None:
        of, tg, o = trip
        lbl = g.objects[o]
        if lbl.is_segment and tg in (Tg.FST, Tg.LST) \
                and of + ins.k != lbl.hfo:
            # taking a non-head address of a segment concretises its end
            out: list[_Step] = []
            for res in _resolve_target(c2, v, ins, mode="address"):
                assert not isinstance(res, _Step)
                c3, v3 = res
                out.append(_add_offset(c3, ins.x, v3, ins.k))
            return out
    return [_add_offset(c2, ins.x, v, ins.k)]


def _exec_free(c: SPC, ins: Instr) -> list[_Step]:
    c2, v = _read_var(c, ins.x)
    out: list[_Step] = []
    for res in _resolve_target(c2, v, ins, mode="free"):
        if isinstance(res, _Step):
            out.append(res)
            continue
        c3, v3 = res
        if v3 == ZERO:
            out.append(_Step(c3))  # freeing null is a no-op
            continue
        of, _, r = c3.smg.pt[v3]
        if of != 0:
            out.append(_Step(c3, _err("InvalidFree", ins,
                                      f"free of an interior pointer "
                                      f"(offset {of})")))
            continue
        if r in c3.stack_objects():
            out.append(_Step(c3, _err("InvalidFree", ins,
                                      "free of a non-heap object")))
            continue
        g4 = c3.smg.copy()
        for of_e, ty_e, _ in g4.fields_of(r):
            g4.del_field(r, of_e, ty_e)
        g4.relabel(r, valid=False)
        out.append(_Step(SPC(g4, dict(c3.vars))))
    return out


def _exec_memcpy(c: SPC, ins: Instr) -> list[_Step]:
    out: list[_Step] = []
    c2, vdst = _read_var(c, ins.x)
    for res_d in _resolve_target(c2, vdst, ins):
        if isinstance(res_d, _Step):
            out.append(res_d)
            continue
        c3, vd = res_d
        c4, vsrc = _read_var(c3, ins.y)
        for res_s in _resolve_target(c4, vsrc, ins):
            if isinstance(res_s, _Step):
                out.append(res_s)
                continue
            c5, vs = res_s
            g = c5.smg
            of_d, _, od = g.pt[vd]
            of_s, _, os_ = g.pt[vs]
            pd, ps, n = of_d + ins.of, of_s + ins.of2, ins.n
            if pd < 0 or pd + n > g.objects[od].size:
                out.append(_Step(c5, _err("OutOfBounds", ins,
                                          "copy beyond destination bounds")))
                continue
            if ps < 0 or ps + n > g.objects[os_].size:
                out.append(_Step(c5, _err("OutOfBounds", ins,
                                          "copy beyond source bounds")))
                continue
            if od == os_ and n > 0 and pd < ps + n and ps < pd + n:
                out.append(_Step(c5, _err("OverlappingCopy", ins,
                                          "memcpy ranges overlap")))
                continue
            out.append(_Step(SPC(_copy_bytes(g, od, pd, os_, ps, n),
                                 dict(c5.vars))))
    return out


def _copy_bytes(g: SMG, od: int, pd: int, os_: int, ps: int, n: int) -> SMG:
    """Transfer the source field cover of an n-byte window by rewriting."""
    if n == 0:
        return g
    g = g.copy()
    # wipe the destination window: overlapped edges lose their inside part
    for of_e, ty_e, v_e in g.fields_of(od):
        lo, hi = of_e, of_e + ty_e.size
        if hi <= pd or pd + n <= lo:
            continue
        g.del_field(od, of_e, ty_e)
        if v_e == ZERO:
            if lo < pd:
                g.set_field(od, lo, FieldType.data(pd - lo), ZERO)
            if pd + n < hi:
                g.set_field(od, pd + n, FieldType.data(hi - pd - n), ZERO)
    shift = pd - ps
    zero_bytes: set[int] = set()
    for of_e, ty_e, v_e in g.fields_of(os_):
        lo, hi = of_e, of_e + ty_e.size
        if v_e == ZERO:
            zero_bytes.update(b for b in range(lo, hi) if ps <= b < ps + n)
            continue
        if lo >= ps and hi <= ps + n:
            g.set_field(od, lo + shift, ty_e, v_e)
    start = None
    for b in sorted(zero_bytes) + [None]:
        if start is not None and (b is None or b != prev + 1):
            g.set_field(od, start + shift, FieldType.data(prev - start + 1),
                        ZERO)
            start = None
        if b is not None:
            if start is None:
                start = b
            prev = b
    return g


def _exec_branch(c: SPC, ins: Instr) -> list[_Step]:
    c2, v1 = _read_var(c, ins.x)
    c3, v2 = _read_var(c2, ins.y)
    g = c3.smg
    t_eq, t_ne = ins.target, ins.target2

    if ins.cond in ("==", "!="):
        yes, no = (t_eq, t_ne) if ins.cond == "==" else (t_ne, t_eq)
        if v1 == v2:
            return [_Step(c3, jump=yes)]
        if decide.prove_neq(g, v1, v2):
            return [_Step(c3, jump=no)]
        out = [_Step(s, jump=yes) for s in decide.assume(c3, "eq", v1, v2)]
        out += [_Step(s, jump=no) for s in decide.assume(c3, "neq", v1, v2)]
        return out

    res = decide.compare_offsets(g, v1, v2, ins.cond)
    if res is True:
        return [_Step(c3, jump=t_eq)]
    if res is False:
        return [_Step(c3, jump=t_ne)]
    return [_Step(c3, jump=t_eq), _Step(c3, jump=t_ne)]


def _exec_exit(c: SPC, ins: Instr) -> list[_Step]:
    stack = c.stack_objects()
    leaked = [o for o, lbl in c.smg.objects.items()
              if o != NULL_OBJECT and o not in stack and lbl.valid]
    if leaked:
        return [_Step(c, _err("MemLeak", ins,
                              f"{len(leaked)} object(s) still allocated at "
                              "exit"), halted=True)]
    return [_Step(c, halted=True)]


# ---------------------------------------------------------------------------
# fixpoint
# ---------------------------------------------------------------------------


@dataclass
class _PathItem:
    block: int
    spc: SPC
    steps: int
    trace: tuple[tuple[int, str], ...]


def _ingest(cfg: AnalysisConfig, cfgraph: CFG, stored: list[SPC], c: SPC,
            block: int) -> Optional[SPC]:
    """Store a configuration at a block entry; None when it is covered."""
    c, _ = collect_garbage(c)
    at_loop = block in cfgraph.loop_heads
    if not cfg.is_hunter:
        if cfg.abstraction_at == "block" or at_loop:
            c = abstract_spc(c, cfg.len_thresholds)
    full_join = (not cfg.is_hunter and cfg.join_at != "never"
                 and (cfg.join_at == "block" or at_loop))
    if not full_join:
        for s in stored:
            if isomorphic(s, c):
                return None
        stored.append(c)
        return c

    while True:
        if any(entails(s, c) for s in stored):
            return None
        survivors = [s for s in stored if not entails(c, s)]
        stored[:] = survivors
        joined = False
        for idx, s in enumerate(stored):
            res = join_spcs(s, c)
            if res is not FAILED:
                del stored[idx]
                c = res[1]
                joined = True
                break
        if not joined:
            stored.append(c)
            return c


def analyze(program: Program, config: Optional[AnalysisConfig] = None
            ) -> AnalysisResult:
    """Run the interpreter to a fixpoint (or budget/error exhaustion)."""
    cfg = config or AnalysisConfig()
    graph = build_cfg(program)
    fixpoint = FixpointState([[] for _ in program.blocks])
    reports: list[ErrorReport] = []
    truncated = False
    transfers = 0

    init = empty_spc(cfg.ptr_size)
    for x in program.variables:
        r = init.smg.add_object(ObjLabel.region(cfg.ptr_size))
        init.vars[x] = r

    worklist: list[_PathItem] = []
    first = _ingest(cfg, graph, fixpoint.states[0], init, 0)
    if first is not None:
        worklist.append(_PathItem(0, first, 0, ()))

    def make_result(verdict: str, note: str = "") -> AnalysisResult:
        return AnalysisResult(verdict, reports, fixpoint, graph,
                              truncated, transfers, note)

    while worklist:
        if cfg.cancel_event is not None and cfg.cancel_event.is_set():
            return make_result("UNKNOWN", "cancelled")
        item = worklist.pop(0 if cfg.search == "bfs" else -1)
        states: list[tuple[SPC, int, tuple]] = [
            (item.spc, item.steps, item.trace)]
        block = program.blocks[item.block]

        for ins in block.instrs:
            next_states: list[tuple[SPC, int, tuple]] = []
            jumps: list[tuple[str, SPC, int, tuple]] = []
            for spc, steps, trace in states:
                transfers += 1
                if transfers > cfg.max_transfers:
                    return make_result("UNKNOWN", "transfer budget exhausted")
                steps += 1
                trace = trace + ((ins.line, print_instr(ins)),)
                if cfg.step_budget is not None and steps > cfg.step_budget:
                    truncated = True
                    continue
                for st in exec_instr(spc, ins):
                    if st.error is not None:
                        rep = replace(st.error, trace=trace)
                        reports.append(rep)
                        if cfg.is_hunter:
                            return make_result("UNSAFE")
                        if rep.kind == "MemLeak" and not st.halted:
                            # warning only: the pruned state continues
                            if st.jump is not None:
                                jumps.append((st.jump, st.spc, steps, trace))
                            else:
                                next_states.append((st.spc, steps, trace))
                        continue
                    if st.halted:
                        continue
                    if st.jump is not None:
                        jumps.append((st.jump, st.spc, steps, trace))
                    else:
                        next_states.append((st.spc, steps, trace))
            states = next_states
            for label, spc, steps, trace in jumps:
                tgt = program.block_index[label]
                kept = _ingest(cfg, graph, fixpoint.states[tgt], spc, tgt)
                if kept is not None:
                    worklist.append(_PathItem(tgt, kept, steps, trace))

    if truncated:
        return make_result("UNKNOWN", "path budget truncated the search")
    if reports:
        return make_result("UNSAFE")
    return make_result("SAFE")
