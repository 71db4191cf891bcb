"""Folding uninterrupted list-node sequences into segments.

Abstraction finds *candidate entries* (an object plus head/next/prev
offsets through which it is linked to a neighbour), computes the longest
sequence of neighbours that may legally be merged behind that entry, and
folds the sequence into one list segment, node by node.  Each elementary
merge reuses the join machinery on the two neighbours' link-restricted
sub-SMGs inside the one graph; the join status prices the merge (equal
sub-heaps are free, entailed ones cost 1, incomparable ones 2) and a
per-cost length threshold decides which sequences are worth folding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .join import FAILED, JoinContext, JoinStatus, join_sub_smgs, _Sentinel
from .reinterp import write_value
from .smg import (
    NULL_OBJECT,
    ObjKind,
    ObjLabel,
    SMG,
    SPC,
    Tg,
    ZERO,
    collect_garbage,
    zero_plus_cycle,
)

DEFAULT_LEN_THRESHOLDS = (2, 2, 3)  #: minimum sequence length per cost 0/1/2


@dataclass(frozen=True)
class CandidateEntry:
    """A possible first node of a foldable list, with its binding offsets.

    ``pfo`` is absent for singly-linked candidates (forward link found but
    no back-link).
    """

    o_c: int
    hfo: int
    nfo: int
    pfo: Optional[int] = None

    @property
    def singly(self) -> bool:
        return self.pfo is None


@dataclass(frozen=True)
class MergePlan:
    """A mergeable sequence (>= 2 nodes) and the price of folding it."""

    sequence: tuple[int, ...]
    cost: int
    entry: CandidateEntry


_COST = {JoinStatus.EQUAL: 0, JoinStatus.SUPSET: 1, JoinStatus.SUBSET: 1,
         JoinStatus.INCOMPARABLE: 2}


def _link_value(g: SMG, o: int, of: int) -> Optional[int]:
    """The pointer value a linking field holds: an explicit edge, or 0 when
    the window is nullified.  None when absent or not address-like."""
    ptr = g.ptr_type
    v = g.hv.get((o, of, ptr))
    if v is not None:
        return v if (v == ZERO or v in g.pt) else None
    window = set(range(of, of + ptr.size))
    zeros: set[int] = set()
    for eof, ety, ev in g.fields_of(o):
        if ev == ZERO:
            zeros.update(range(eof, eof + ety.size))
    return ZERO if window <= zeros else None


def _ensure_link(g: SMG, o: int, of: int) -> Optional[int]:
    """Like :func:`_link_value` but installs the edge in place."""
    v = _link_value(g, o, of)
    if v is not None:
        g.set_field(o, of, g.ptr_type, v)
    return v


# ---------------------------------------------------------------------------
# candidates
# ---------------------------------------------------------------------------


def find_candidates(c: SPC) -> list[CandidateEntry]:
    """All candidate entries of the configuration's graph.

    A doubly-linked candidate needs a forward pointer into a neighbour's
    head and a back pointer from the neighbour; when only the forward link
    exists, a singly-linked candidate is emitted instead.
    """
    g = c.smg
    stack = c.stack_objects()
    ptr = g.ptr_type
    out: list[CandidateEntry] = []
    for o_c in sorted(g.objects):
        lbl = g.objects[o_c]
        if o_c == NULL_OBJECT or o_c in stack or not lbl.valid \
                or lbl.level != 0:
            continue
        for nfo, ty, a1 in g.fields_of(o_c):
            if ty != ptr or a1 == ZERO or a1 not in g.pt:
                continue
            hfo, tg1, o = g.pt[a1]
            if tg1 not in (Tg.FST, Tg.REG) or o == NULL_OBJECT or o == o_c:
                continue
            back = False
            for pfo, ty2, a2 in g.fields_of(o):
                if ty2 != ptr or a2 == ZERO or a2 not in g.pt:
                    continue
                if g.pt[a2] == (hfo, Tg.LST, o_c) or \
                        g.pt[a2] == (hfo, Tg.REG, o_c):
                    if nfo < pfo:
                        out.append(CandidateEntry(o_c, hfo, nfo, pfo))
                        back = True
            if not back:
                out.append(CandidateEntry(o_c, hfo, nfo))
    return out


# ---------------------------------------------------------------------------
# elementary merge
# ---------------------------------------------------------------------------


def _merge_core(g: SMG, o1: int, o2: int, hfo: int, nfo: int,
                pfo: Optional[int]
                ) -> Union[_Sentinel, tuple[JoinStatus, int, JoinContext]]:
    """Merge ``o1``/``o2`` into a fresh segment ``d`` in place.

    The linking fields are parked at zero while the two link-restricted
    sub-SMGs are joined below ``d``, then restored.  When two regions were
    merged, the joined sub-heap becomes nested: levels rise by one and the
    back-edges into ``d`` switch to the ``all`` specifier.
    """
    ptr = g.ptr_type
    lbl1 = g.objects[o1]
    lbl2 = g.objects[o2]
    link_offs = [nfo] + ([pfo] if pfo is not None else [])

    saved: dict[tuple[int, int], int] = {}
    for o in (o1, o2):
        for of in link_offs:
            v = _ensure_link(g, o, of)
            if v is None:
                return FAILED
            saved[(o, of)] = v
            g.set_field(o, of, ptr, ZERO)

    if pfo is not None:
        new_lbl = ObjLabel.dls(lbl1.size, lbl1.len_prime + lbl2.len_prime,
                               hfo, nfo, pfo, level=lbl1.level)
    else:
        new_lbl = ObjLabel.sls(lbl1.size, lbl1.len_prime + lbl2.len_prime,
                               hfo, nfo, level=lbl1.level)

    ctx = JoinContext(g1=g, g2=g, g=g, same_graph=True)
    d = ctx.new_obj(new_lbl)
    ctx.m1_obj[o1] = d
    ctx.m2_obj[o2] = d
    if lbl1.kind is lbl2.kind:
        l_diff = 0
    else:
        l_diff = 1 if lbl1.is_segment else -1

    ok = join_sub_smgs(ctx, o1, o2, d, l_diff)
    if not ok or zero_plus_cycle(g):
        return FAILED

    # restore the parked linking fields on the source nodes
    for o in (o1, o2):
        for of in link_offs:
            g.del_field(o, of, ptr)
    restored = g
    for (o, of), v in sorted(saved.items()):
        restored = write_value(restored, o, of, ptr, v)
    g.hv = restored.hv
    g.values = restored.values
    g.next_val = restored.next_val

    if not lbl1.is_segment and not lbl2.is_segment:
        bumped = (set(ctx.m1_obj.values()) | set(ctx.m2_obj.values())) - {d}
        for o in bumped:
            g.relabel(o, level=g.objects[o].level + 1)
        for v in set(ctx.m1_val.values()) | set(ctx.m2_val.values()):
            if v in g.values:
                g.values[v] += 1
        for v, (of, tg, o) in list(g.pt.items()):
            if o == d and tg is not Tg.ALL:
                g.pt[v] = (of, Tg.ALL, d)
    return ctx.status, d, ctx


def merge_pair(g: SMG, o1: int, o2: int, hfo: int, nfo: int,
               pfo: Optional[int]
               ) -> Union[_Sentinel, tuple[JoinStatus, SMG, int,
                                           list[int], list[int],
                                           list[int], list[int]]]:
    """Pure elementary merge: returns the status, the extended graph, the
    fresh segment, and the per-side sets of joined (non-shared) nodes."""
    g = g.copy()
    res = _merge_core(g, o1, o2, hfo, nfo, pfo)
    if res is FAILED:
        return FAILED
    status, d, ctx = res
    return (status, g, d,
            sorted(ctx.m1_obj), sorted(ctx.m1_val),
            sorted(ctx.m2_obj), sorted(ctx.m2_val))


# ---------------------------------------------------------------------------
# longest mergeable sequences
# ---------------------------------------------------------------------------


def _forward_neighbour(g: SMG, o: int, e: CandidateEntry) -> Optional[int]:
    a1 = g.hv.get((o, e.nfo, g.ptr_type))
    if a1 is None or a1 not in g.pt:
        return None
    hfo, tg, nxt = g.pt[a1]
    if hfo != e.hfo or tg not in (Tg.FST, Tg.REG):
        return None
    return nxt


def _member_ok(c: SPC, e: CandidateEntry, o: int) -> bool:
    g = c.smg
    lbl = g.objects.get(o)
    if lbl is None or o == NULL_OBJECT or not lbl.valid or lbl.level != 0:
        return False
    if o in c.stack_objects():
        return False
    if lbl.is_segment:
        want = ObjKind.SLS if e.singly else ObjKind.DLS
        if lbl.kind is not want:
            return False
        if (lbl.hfo, lbl.nfo, lbl.pfo) != (e.hfo, e.nfo, e.pfo):
            return False
    # every member needs address-like link values (so the folded segment
    # keeps well-formed next/prev pointers)
    if _link_value(g, o, e.nfo) is None:
        return False
    if not e.singly and _link_value(g, o, e.pfo) is None:
        return False
    return True


def _pair_linked(g: SMG, e: CandidateEntry, o1: int, o2: int) -> bool:
    a1 = g.hv.get((o1, e.nfo, g.ptr_type))
    if a1 is None or g.pt.get(a1, (None, None, None))[2] != o2:
        return False
    hfo, tg, _ = g.pt[a1]
    if hfo != e.hfo or tg not in (Tg.FST, Tg.REG):
        return False
    if e.singly:
        return True
    a2 = g.hv.get((o2, e.pfo, g.ptr_type))
    if a2 is None or a2 not in g.pt:
        return False
    return g.pt[a2] in ((e.hfo, Tg.LST, o1), (e.hfo, Tg.REG, o1))


def _uninterrupted(c: SPC, e: CandidateEntry, o1: int, o2: int,
                   o_prev: Optional[int],
                   objs1: set[int], vals1: set[int],
                   objs2: set[int], vals2: set[int]) -> bool:
    """The no-external-pointer conditions for one neighbouring pair."""
    g = c.smg
    stack = c.stack_objects()

    # joined node sets must be private heap-only sub-heaps
    for objs, vals, root in ((objs1, vals1, o1), (objs2, vals2, o2)):
        if objs & stack:
            return False
        for a, (of, tg, tgt) in g.pt.items():
            if a not in vals and tgt in objs - {root}:
                return False
        for (holder, _, _), v in g.hv.items():
            if holder not in objs and v in vals and v != ZERO:
                return False

    def holders(value: int) -> set[int]:
        return {o for (o, _, _), v in g.hv.items() if v == value}

    # head-of-interior-region pointers may come only from the neighbours
    # or the private sub-heap
    if o1 != e.o_c and not g.objects[o1].is_segment:
        allowed = objs1 | {o2} | ({o_prev} if o_prev is not None else set())
        for a, trip in g.pt.items():
            if trip == (e.hfo, Tg.REG, o1):
                if holders(a) - allowed:
                    return False

    # segment ends inside the pair are reachable from the partner only
    if g.objects[o1].is_segment:
        a = g.find_address(e.hfo, Tg.LST, o1)
        if a is not None and holders(a) - {o2}:
            return False
    if g.objects[o2].is_segment:
        a = g.find_address(e.hfo, Tg.FST, o2)
        if a is not None and holders(a) - {o1}:
            return False

    # non-head offsets may be targeted from the private sub-heaps only
    for root, objs in ((o1, objs1), (o2, objs2)):
        for a, (of, tg, tgt) in g.pt.items():
            if tgt == root and of != e.hfo:
                if holders(a) - objs:
                    return False
    return True


def longest_mergeable_sequence(c: SPC, e: CandidateEntry
                               ) -> Optional[MergePlan]:
    """Longest chain of distinct nodes behind ``e`` whose pairs all link
    correctly, join successfully, and are free of external pointers."""
    g = c.smg
    if not _member_ok(c, e, e.o_c):
        return None
    seq = [e.o_c]
    costs: list[int] = []
    prev: Optional[int] = None
    cur = e.o_c
    while True:
        nxt = _forward_neighbour(g, cur, e)
        if nxt is None or nxt in seq or not _member_ok(c, e, nxt):
            break
        if g.objects[nxt].size != g.objects[cur].size:
            break
        if not _pair_linked(g, e, cur, nxt):
            break
        trial = merge_pair(g, cur, nxt, e.hfo, e.nfo, e.pfo)
        if trial is FAILED:
            break
        status, _, _, objs1, vals1, objs2, vals2 = trial
        if not _uninterrupted(c, e, cur, nxt, prev,
                              set(objs1), set(vals1),
                              set(objs2), set(vals2)):
            break
        seq.append(nxt)
        costs.append(_COST[status])
        prev, cur = cur, nxt
    if len(seq) < 2:
        return None
    return MergePlan(tuple(seq), max(costs), e)


# ---------------------------------------------------------------------------
# merging a whole sequence, top-level loop
# ---------------------------------------------------------------------------


def merge_sequence(c: SPC, plan: MergePlan) -> SPC:
    """Fold the planned sequence left to right; on any elementary failure
    the original configuration is returned unchanged."""
    e = plan.entry
    g = c.smg.copy()
    ptr = g.ptr_type
    cur = plan.sequence[0]
    for nxt in plan.sequence[1:]:
        a_p = _link_value(g, cur, e.pfo) if e.pfo is not None else None
        a_n = _link_value(g, nxt, e.nfo)
        res = _merge_core(g, cur, nxt, e.hfo, e.nfo, e.pfo)
        if res is FAILED:
            return c
        _, d, _ = res

        for tg in (Tg.FST, Tg.REG):
            a_f = g.find_address(e.hfo, tg, cur)
            if a_f is not None:
                g.pt[a_f] = (e.hfo, Tg.FST, d)
        for tg in (Tg.LST, Tg.REG):
            a_l = g.find_address(e.hfo, tg, nxt)
            if a_l is not None:
                g.pt[a_l] = (e.hfo, Tg.LST, d)

        assert a_n is not None
        g = write_value(g, d, e.nfo, ptr, a_n)
        if e.pfo is not None:
            assert a_p is not None
            g = write_value(g, d, e.pfo, ptr, a_p)
        if zero_plus_cycle(g):
            return c

        cleaned, _ = collect_garbage(SPC(g, dict(c.vars)))
        g = cleaned.smg
        cur = d
    return SPC(g, dict(c.vars))


def abstract_spc(c: SPC, thresholds: tuple[int, int, int]
                 = DEFAULT_LEN_THRESHOLDS) -> SPC:
    """Fold sequences until none passes its cost's length threshold.

    Among the surviving plans the cheapest wins, then the longest, then the
    one with the smallest head object id (a fixed tie-break keeps results
    reproducible).
    """
    while True:
        plans = []
        for e in find_candidates(c):
            p = longest_mergeable_sequence(c, e)
            if p is not None and len(p.sequence) >= thresholds[p.cost]:
                plans.append(p)
        if not plans:
            return c
        plans.sort(key=lambda p: (p.cost, -len(p.sequence), p.sequence[0],
                                  p.entry.hfo, p.entry.nfo,
                                  -1 if p.entry.pfo is None else p.entry.pfo))
        nxt = merge_sequence(c, plans[0])
        if nxt.smg is c.smg:
            return c
        c = nxt
