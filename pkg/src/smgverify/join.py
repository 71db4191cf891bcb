"""Joining symbolic memory graphs.

The join of two graphs is a common generalisation built by a simultaneous
traversal that pairs up objects and values, never mapping one node of one
graph onto two nodes of the other.  A running :class:`JoinStatus` records
the semantic relation between the inputs that the performed steps imply.

The traversal is mutually recursive: :func:`join_sub_smgs` walks the paired
fields of two objects, :func:`join_values` merges the field values,
:func:`join_target_objects` merges address targets and recurses, and
:func:`insert_segment_and_join` compensates a list segment present on only
one side by virtually inserting a possibly-empty (0+) copy of it, which may
later be repaired by the delayed join when a real counterpart shows up.

Two entry points exist: :func:`join_spcs` joins whole configurations
starting from the shared program variables, and the abstraction module
drives the same machinery to merge neighbouring list nodes inside a single
graph.  Entailment and isomorphism checks are status filters over the join.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .reinterp import (
    JoinStatus,
    join_fields,
    join_fields_inplace,
    update_join_status,
)
from .smg import NULL_OBJECT, ObjKind, SMG, SPC, Tg, ZERO, zero_plus_cycle

__all__ = [
    "FAILED",
    "RETRY",
    "JoinContext",
    "JoinStatus",
    "update_join_status",
    "join_fields",
    "join_sub_smgs",
    "join_values",
    "join_target_objects",
    "map_target_address",
    "match_objects",
    "insert_segment_and_join",
    "join_spcs",
    "entails",
    "isomorphic",
]


class _Sentinel:
    def __init__(self, name: str) -> None:
        self._name = name

    def __repr__(self) -> str:
        return self._name


FAILED = _Sentinel("FAILED")  #: irrecoverable join failure
RETRY = _Sentinel("RETRY")    #: recoverable, caller may try a segment insertion

_Res = Union[int, _Sentinel]


@dataclass
class JoinContext:
    """State threaded through one join invocation.

    ``m1_*``/``m2_*`` map source nodes of either side to destination nodes
    and stay injective; the null object and the zero value never appear in
    their ranges.  ``created_*`` tracks the destination nodes built by this
    invocation so the delayed join only ever sweeps its own constructions.
    """

    g1: SMG
    g2: SMG
    g: SMG
    m1_obj: dict[int, int] = field(default_factory=dict)
    m2_obj: dict[int, int] = field(default_factory=dict)
    m1_val: dict[int, int] = field(default_factory=dict)
    m2_val: dict[int, int] = field(default_factory=dict)
    status: JoinStatus = JoinStatus.EQUAL
    same_graph: bool = False
    created_obj: set[int] = field(default_factory=set)
    created_val: set[int] = field(default_factory=set)
    # nodes materialised by optimistic segment insertions; only these are
    # ever swept again by the delayed join
    inserted_obj: set[int] = field(default_factory=set)
    inserted_val: set[int] = field(default_factory=set)

    def new_obj(self, label) -> int:
        oid = self.g.add_object(label)
        self.created_obj.add(oid)
        return oid

    def new_val(self, level: int) -> int:
        vid = self.g.add_value(level)
        self.created_val.add(vid)
        return vid

    def bump(self, s: JoinStatus) -> None:
        self.status = update_join_status(self.status, s)


def _side(ctx: JoinContext, side: str):
    """(source graph, own obj/val maps, other obj/val maps) for a side."""
    if side == "left":
        return ctx.g1, ctx.m1_obj, ctx.m1_val, ctx.m2_obj, ctx.m2_val
    return ctx.g2, ctx.m2_obj, ctx.m2_val, ctx.m1_obj, ctx.m1_val


def _is_link_field(g: SMG, o: int, of: int, ty) -> bool:
    return ty == g.ptr_type and of in g.link_offsets(o)


def _ensure_segment_links(g: SMG, o: int) -> bool:
    """Destination segments need explicit next/prev pointer edges; rebuild
    them from the zero cover when field alignment folded null links into
    byte runs.  False when a link is neither present nor provably null."""
    lbl = g.objects[o]
    if not lbl.is_segment:
        return True
    ptr = g.ptr_type
    zeros: set[int] = set()
    for eof, ety, ev in g.fields_of(o):
        if ev == ZERO:
            zeros.update(range(eof, eof + ety.size))
    for of in sorted(g.link_offsets(o)):
        if g.hv.get((o, of, ptr)) is not None:
            continue
        if set(range(of, of + ptr.size)) <= zeros:
            g.install_field(o, of, ptr, ZERO)
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# core traversal
# ---------------------------------------------------------------------------


def join_sub_smgs(ctx: JoinContext, o1: int, o2: int, o: int,
                  l_diff: int) -> bool:
    """Join the sub-SMGs rooted at ``o1``/``o2`` into destination ``o``.

    Returns False on irrecoverable failure.  The nesting level difference
    grows by one for every list segment entered on the left and shrinks for
    every one entered on the right (its linking fields excepted), so that
    correspondingly nested values compare as equals.
    """
    s = join_fields_inplace(ctx.g1, ctx.g2, o1, o2)
    ctx.bump(s)

    fields1 = {(of, ty) for of, ty, _ in ctx.g1.fields_of(o1)}
    fields2 = {(of, ty) for of, ty, _ in ctx.g2.fields_of(o2)}
    for of, ty in sorted(fields1 | fields2,
                         key=lambda f: (f[0], f[1].size, f[1].kind.value)):
        v1 = ctx.g1.hv.get((o1, of, ty))
        v2 = ctx.g2.hv.get((o2, of, ty))
        if v1 is None or v2 is None:
            return False
        ld = l_diff
        if ctx.g1.objects[o1].is_segment and not _is_link_field(ctx.g1, o1, of, ty):
            ld += 1
        if ctx.g2.objects[o2].is_segment and not _is_link_field(ctx.g2, o2, of, ty):
            ld -= 1
        v = join_values(ctx, v1, v2, ld)
        if v is FAILED:
            return False
        ctx.g.set_field(o, of, ty, v)
    return True


def join_values(ctx: JoinContext, v1: int, v2: int, l_diff: int) -> _Res:
    """Join a pair of values; returns the destination value or FAILED."""
    if v1 == v2 and (ctx.same_graph or v1 == ZERO):
        # a genuinely shared node (same graph) or the common zero value
        return v1
    mv1 = ctx.m1_val.get(v1)
    mv2 = ctx.m2_val.get(v2)
    if mv1 is not None and mv1 == mv2:
        return mv1

    addr1 = ctx.g1.is_address(v1)
    addr2 = ctx.g2.is_address(v2)
    if not addr1 and not addr2:
        if mv1 is not None or mv2 is not None:
            return FAILED
        lv1 = ctx.g1.values[v1]
        lv2 = ctx.g2.values[v2]
        v = ctx.new_val(max(lv1, lv2))
        ctx.m1_val[v1] = v
        ctx.m2_val[v2] = v
        if lv1 - lv2 < l_diff:
            ctx.bump(JoinStatus.SUBSET)
        elif lv1 - lv2 > l_diff:
            ctx.bump(JoinStatus.SUPSET)
        return v
    if not addr1 or not addr2:
        return FAILED  # an address never joins a plain data value

    res = join_target_objects(ctx, v1, v2, l_diff)
    if res is FAILED:
        return FAILED
    if res is not RETRY:
        return res

    o1 = ctx.g1.pt[v1][2]
    o2 = ctx.g2.pt[v2][2]
    if ctx.g1.objects[o1].is_segment:
        res = insert_segment_and_join(ctx, "left", v1, v2, l_diff)
        if res is FAILED:
            return FAILED
        if res is not RETRY:
            return res
    if ctx.g2.objects[o2].is_segment:
        res = insert_segment_and_join(ctx, "right", v1, v2, l_diff)
        if res is FAILED or res is RETRY:
            return FAILED
        return res
    return FAILED


def join_target_objects(ctx: JoinContext, a1: int, a2: int,
                        l_diff: int) -> _Res:
    """Join the target objects of two addresses; RETRY flags a local
    mismatch the caller may compensate by a segment insertion."""
    of1, tg1, o1 = ctx.g1.pt[a1]
    of2, tg2, o2 = ctx.g2.pt[a2]
    if of1 != of2:
        return RETRY
    if ctx.g1.values[a1] - ctx.g2.values[a2] != l_diff:
        return RETRY
    lbl1 = ctx.g1.objects[o1]
    lbl2 = ctx.g2.objects[o2]
    if lbl1.kind is lbl2.kind and tg1 is not tg2:
        return RETRY

    mo1 = ctx.m1_obj.get(o1)
    mo2 = ctx.m2_obj.get(o2)
    if (o1 == NULL_OBJECT and o2 == NULL_OBJECT) or \
            (mo1 is not None and mo1 == mo2):
        return map_target_address(ctx, a1, a2)

    s = match_objects(ctx, o1, o2)
    if s is FAILED:
        return RETRY
    ctx.status = s

    base = lbl1 if lbl1.is_segment else (lbl2 if lbl2.is_segment else lbl1)
    new_lbl = replace(base, level=max(lbl1.level, lbl2.level))
    if lbl1.is_segment or lbl2.is_segment:
        new_lbl = replace(new_lbl,
                          min_len=min(lbl1.len_prime, lbl2.len_prime))
    o = ctx.new_obj(new_lbl)

    # delayed join: a previous optimistic insertion mapped one side already
    if mo1 is not None:
        _delayed_replace(ctx, mo1, o)
    if mo2 is not None:
        _delayed_replace(ctx, mo2, o)

    ctx.m1_obj[o1] = o
    ctx.m2_obj[o2] = o
    a = map_target_address(ctx, a1, a2)
    if not join_sub_smgs(ctx, o1, o2, o, l_diff):
        return FAILED
    if not _ensure_segment_links(ctx.g, o):
        return FAILED
    return a


def map_target_address(ctx: JoinContext, a1: int, a2: int) -> int:
    """Produce the destination address for two source addresses whose
    targets are already joined (or both null)."""
    of, tg1, o1 = ctx.g1.pt[a1]
    _, tg2, _ = ctx.g2.pt[a2]
    o = NULL_OBJECT if o1 == NULL_OBJECT else ctx.m1_obj[o1]
    tg = tg1 if ctx.g1.objects[o1].is_segment else tg2
    existing = ctx.g.find_address(of, tg, o)
    if existing is not None:
        return existing
    level = ctx.g.objects[o].level + (1 if tg is Tg.ALL else 0)
    a = ctx.new_val(level)
    ctx.g.pt[a] = (of, tg, o)
    ctx.m1_val[a1] = a
    ctx.m2_val[a2] = a
    return a


def match_objects(ctx: JoinContext, o1: int, o2: int
                  ) -> Union[JoinStatus, _Sentinel]:
    """Local check whether two objects can be joined under the current
    mappings; on success returns the status updated by their labels."""
    if o1 == NULL_OBJECT or o2 == NULL_OBJECT:
        return FAILED
    mo1 = ctx.m1_obj.get(o1)
    mo2 = ctx.m2_obj.get(o2)
    if mo1 is not None and mo2 is not None and mo1 != mo2:
        return FAILED
    if mo1 is not None and mo1 in set(ctx.m2_obj.values()):
        return FAILED
    if mo2 is not None and mo2 in set(ctx.m1_obj.values()):
        return FAILED
    lbl1 = ctx.g1.objects[o1]
    lbl2 = ctx.g2.objects[o2]
    if lbl1.size != lbl2.size or lbl1.valid != lbl2.valid:
        return FAILED
    if lbl1.is_segment and lbl2.is_segment:
        if lbl1.kind is not lbl2.kind:
            return FAILED
        if (lbl1.nfo, lbl1.pfo, lbl1.hfo) != (lbl2.nfo, lbl2.pfo, lbl2.hfo):
            return FAILED

    fields1 = {(of, ty) for of, ty, _ in ctx.g1.fields_of(o1)}
    fields2 = {(of, ty) for of, ty, _ in ctx.g2.fields_of(o2)}
    for of, ty in sorted(fields1 | fields2,
                         key=lambda f: (f[0], f[1].size, f[1].kind.value)):
        v1 = ctx.g1.hv.get((o1, of, ty))
        v2 = ctx.g2.hv.get((o2, of, ty))
        if v1 is None or v2 is None:
            continue
        mv1 = ctx.m1_val.get(v1)
        mv2 = ctx.m2_val.get(v2)
        if mv1 is not None and mv2 is not None and mv1 != mv2:
            return FAILED

    s = ctx.status
    if lbl1.len_prime < lbl2.len_prime or \
            (lbl1.is_segment and not lbl2.is_segment):
        s = update_join_status(s, JoinStatus.SUPSET)
    if lbl1.len_prime > lbl2.len_prime or \
            (not lbl1.is_segment and lbl2.is_segment):
        s = update_join_status(s, JoinStatus.SUBSET)
    return s


# ---------------------------------------------------------------------------
# segment insertion and delayed join
# ---------------------------------------------------------------------------


def insert_segment_and_join(ctx: JoinContext, side: str, a1: int, a2: int,
                            l_diff: int) -> _Res:
    """Compensate a segment missing on the other side.

    The segment addressed on ``side`` is copied into the destination as a
    0+ segment (with its forward-restricted sub-SMG), the join then
    continues between the segment's successor value and the other side's
    unchanged address.
    """
    gs, ms_obj, ms_val, other_obj, other_val = _side(ctx, side)
    a_self, a_partner = (a1, a2) if side == "left" else (a2, a1)

    of, tg, d1 = gs.pt[a_self]
    lbl = gs.objects[d1]
    if tg is Tg.FST:
        nf = lbl.nfo
    elif tg is Tg.LST and lbl.kind is ObjKind.DLS:
        nf = lbl.pfo
    else:
        return RETRY
    a_next = gs.hv.get((d1, nf, gs.ptr_type))
    if a_next is None:
        return RETRY

    def recurse(ld: int) -> _Res:
        if side == "left":
            return join_values(ctx, a_next, a_partner, ld)
        return join_values(ctx, a_partner, a_next, ld)

    if d1 in ms_obj:
        # the segment was already joined along another path
        d = ms_obj[d1]
        if d in set(other_obj.values()):
            return RETRY
        if a_self in ms_val:
            return ms_val[a_self]
        a = ctx.g.find_address(of, tg, d)
        if a is None:
            a = ctx.new_val(ctx.g.objects[d].level)
            ctx.g.pt[a] = (of, tg, d)
        ms_val[a_self] = a
        res = recurse(l_diff)
        if res is FAILED or res is RETRY:
            return FAILED
        ctx.g.set_field(d, nf, ctx.g.ptr_type, res)
        return a

    mn = ms_val.get(a_next)
    mp = other_val.get(a_partner)
    if mn is not None and mp is not None and mn != mp:
        return RETRY

    one_sided = JoinStatus.SUPSET if side == "left" else JoinStatus.SUBSET
    ctx.bump(one_sided if lbl.min_len == 0 else JoinStatus.INCOMPARABLE)

    _copy_restricted(ctx, side, d1, nf)
    d = ms_obj[d1]

    a = ctx.g.find_address(of, tg, d)
    if a is None:
        a = ctx.new_val(ctx.g.objects[d].level)
        ctx.g.pt[a] = (of, tg, d)
        ms_val[a_self] = a

    res = recurse(l_diff)
    if res is FAILED or res is RETRY:
        return FAILED
    ctx.g.set_field(d, nf, ctx.g.ptr_type, res)
    return a


def _copy_restricted(ctx: JoinContext, side: str, d1: int, nf: int) -> None:
    """Copy the {nf}-restricted sub-SMG rooted at ``d1`` into the
    destination, reusing images of nodes mapped earlier; the copy of ``d1``
    becomes a 0+ segment.  The zero value is shared, never restricted."""
    gs, ms_obj, ms_val, _, _ = _side(ctx, side)
    succ = gs.hv.get((d1, nf, gs.ptr_type))
    skip_vals = {succ} - {ZERO, None}
    objs, vals = gs.reach(seed_objects=[d1],
                          skip_values=frozenset(skip_vals))

    fresh_objs: list[int] = []
    for o in sorted(objs):
        if o == NULL_OBJECT or o in ms_obj:
            continue
        lbl = gs.objects[o]
        if o == d1:
            lbl = replace(lbl, min_len=0)
        ms_obj[o] = ctx.new_obj(lbl)
        ctx.inserted_obj.add(ms_obj[o])
        fresh_objs.append(o)

    for v in sorted(vals):
        if v == ZERO or v in ms_val or v in skip_vals:
            continue
        trip = gs.pt.get(v)
        if trip is not None:
            ofv, tgv, ov = trip
            tgt = NULL_OBJECT if ov == NULL_OBJECT else ms_obj.get(ov)
            if tgt is None:
                continue  # target lies beyond the restriction
            existing = ctx.g.find_address(ofv, tgv, tgt)
            if existing is not None:
                ms_val[v] = existing
                continue
            nv = ctx.new_val(gs.values[v])
            ctx.g.pt[nv] = (ofv, tgv, tgt)
            ms_val[v] = nv
            ctx.inserted_val.add(nv)
        else:
            ms_val[v] = ctx.new_val(gs.values[v])
            ctx.inserted_val.add(ms_val[v])

    for o in fresh_objs:
        for ofe, tye, ve in gs.fields_of(o):
            if o == d1 and ofe == nf and tye == gs.ptr_type:
                continue  # rejoined with the other side afterwards
            if ve in skip_vals:
                continue
            dest_v = ZERO if ve == ZERO else ms_val.get(ve)
            if dest_v is None:
                continue
            ctx.g.set_field(ms_obj[o], ofe, tye, dest_v)


def _delayed_replace(ctx: JoinContext, old: int, new: int) -> None:
    """Replace a destination object produced by an optimistic insertion.

    Incoming points-to edges of ``old`` move to ``new``; ``old`` and every
    node this join created that is now reachable through ``old`` alone are
    swept, and mappings onto swept nodes are dropped.
    """
    g = ctx.g
    for v, (of, tg, o) in list(g.pt.items()):
        if o == old:
            g.pt[v] = (of, tg, new)

    objs_s, vals_s = g.reach(seed_objects=[old])
    cand_obj = (objs_s & ctx.inserted_obj) | {old}
    cand_obj.discard(new)
    cand_val = vals_s & ctx.inserted_val

    anchor_obj = sorted(set(g.objects) - cand_obj)
    anchor_val = sorted(set(g.values) - cand_val)
    live_o, live_v = g.reach(seed_objects=anchor_obj, seed_values=anchor_val)

    doomed_obj = (cand_obj - live_o) | {old}
    doomed_obj.discard(NULL_OBJECT)
    doomed_val = cand_val - live_v
    doomed_val.discard(ZERO)

    g.remove_objects(doomed_obj)
    g.remove_values(doomed_val)
    for m in (ctx.m1_obj, ctx.m2_obj):
        for k in [k for k, v in m.items() if v in doomed_obj]:
            del m[k]
    for m in (ctx.m1_val, ctx.m2_val):
        for k in [k for k, v in m.items() if v in doomed_val]:
            del m[k]
    for s in (ctx.created_obj, ctx.inserted_obj):
        s -= doomed_obj
    for s in (ctx.created_val, ctx.inserted_val):
        s -= doomed_val


# ---------------------------------------------------------------------------
# configuration-level join
# ---------------------------------------------------------------------------


def join_spcs(c1: SPC, c2: SPC
              ) -> Union[tuple[JoinStatus, SPC], _Sentinel]:
    """Join two garbage-free configurations over the same variables.

    Variables are processed in name order; the result is rejected if it
    acquired a cycle of 0+ segments only.  Inputs are never modified.
    """
    if set(c1.vars) != set(c2.vars):
        return FAILED
    if c1.smg.ptr_size != c2.smg.ptr_size:
        return FAILED
    ctx = JoinContext(g1=c1.smg.copy(), g2=c2.smg.copy(),
                      g=SMG.empty(c1.smg.ptr_size))
    nu: dict[str, int] = {}
    for x in sorted(c1.vars):
        r1, r2 = c1.vars[x], c2.vars[x]
        if ctx.g1.objects[r1] != ctx.g2.objects[r2]:
            return FAILED
        r = ctx.new_obj(ctx.g1.objects[r1])
        ctx.m1_obj[r1] = r
        ctx.m2_obj[r2] = r
        nu[x] = r
    for x in sorted(c1.vars):
        if not join_sub_smgs(ctx, c1.vars[x], c2.vars[x], nu[x], 0):
            return FAILED
    if zero_plus_cycle(ctx.g):
        return FAILED
    return ctx.status, SPC(ctx.g, nu)


def entails(c1: SPC, c2: SPC) -> bool:
    """True iff ``c1`` covers ``c2``: their join succeeds and reports that
    the left side is equal or more general."""
    res = join_spcs(c1, c2)
    if res is FAILED:
        return False
    status, _ = res
    return status in (JoinStatus.EQUAL, JoinStatus.SUPSET)


def isomorphic(c1: SPC, c2: SPC) -> bool:
    """True iff the two configurations join with an unchanged status."""
    res = join_spcs(c1, c2)
    if res is FAILED:
        return False
    status, _ = res
    return status is JoinStatus.EQUAL
