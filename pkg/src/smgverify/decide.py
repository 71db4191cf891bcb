"""Equality and inequality reasoning over graph values.

Equality of values is plain node identity.  Inequality is proven by a
sound, incomplete procedure: both values are first chased through chains of
possibly-empty (0+) segments, then compared as addresses; sharing anything
along the way, leaving object bounds, or plain data values all make the
procedure answer "unknown" rather than risk a wrong "different".

When neither side is decided, :func:`assume` restricts a configuration to
one branch of a comparison: equal branches substitute values and drop empty
segment chains, unequal branches pump a minimum length into one of the
segments that would otherwise let the values collide.
"""

from __future__ import annotations

from typing import Optional

from .smg import (
    NULL_OBJECT,
    ObjKind,
    ObjLabel,
    SMG,
    SPC,
    Tg,
    ZERO,
    remove_zero_segment,
)


def look_through(g: SMG, v: int) -> tuple[int, set[int]]:
    """Follow 0+ segments from ``v`` in the forward direction.

    A first-node address is chased through the segment's next field, a
    last-node address through its prev field, as long as the segment may be
    empty.  Returns the final value and the set of traversed segments.
    """
    visited: set[int] = set()
    while True:
        trip = g.pt.get(v)
        if trip is None:
            return v, visited
        of, tg, o = trip
        if o == NULL_OBJECT or o in visited:
            return v, visited
        lbl = g.objects[o]
        if lbl.len_prime != 0:
            return v, visited
        visited.add(o)
        if tg is Tg.FST:
            nxt = g.hv.get((o, lbl.nfo, g.ptr_type))
        elif tg is Tg.LST and lbl.kind is ObjKind.DLS:
            nxt = g.hv.get((o, lbl.pfo, g.ptr_type))
        else:
            return v, visited
        if nxt is None:
            return v, visited
        v = nxt


def prove_neq(g: SMG, v1: int, v2: int) -> bool:
    """True only when the two values are guaranteed different."""
    v1, seen1 = look_through(g, v1)
    v2, seen2 = look_through(g, v2)
    if v1 == v2 or (seen1 & seen2):
        return False  # the values may meet once empty segments vanish
    if v1 not in g.pt or v2 not in g.pt:
        return False  # plain data values are never provably different
    of1, tg1, o1 = g.pt[v1]
    of2, tg2, o2 = g.pt[v2]
    if o1 == o2:
        if tg1 is tg2:
            return True  # same object, different offsets
        if {tg1, tg2} == {Tg.FST, Tg.LST}:
            return g.objects[o1].len_prime >= 2
        return False
    if of1 < 0 or of2 < 0:
        return False
    if v1 != ZERO and g.objects[o1].size <= of1:
        return False
    if v2 != ZERO and g.objects[o2].size <= of2:
        return False
    if v1 == ZERO or v2 == ZERO:
        return True  # null versus an in-bounds address of an object
    return g.objects[o1].valid and g.objects[o2].valid


def compare_offsets(g: SMG, v1: int, v2: int, op: str) -> Optional[bool]:
    """Decide ``v1 op v2`` when both point into the same concrete region;
    anything else is None (undecided)."""
    t1 = g.pt.get(v1)
    t2 = g.pt.get(v2)
    if t1 is None or t2 is None:
        return None
    of1, tg1, o1 = t1
    of2, tg2, o2 = t2
    if o1 != o2 or tg1 is not Tg.REG or tg2 is not Tg.REG:
        return None
    return {
        "<": of1 < of2,
        "<=": of1 <= of2,
        ">": of1 > of2,
        ">=": of1 >= of2,
    }[op]


# ---------------------------------------------------------------------------
# branch restriction
# ---------------------------------------------------------------------------


def _substitute(g: SMG, old: int, new: int) -> SMG:
    """Replace every stored occurrence of a plain value by another value."""
    g = g.copy()
    for key, v in list(g.hv.items()):
        if v == old:
            g.hv[key] = new
    g.values.pop(old, None)
    return g


def _zero_chain(g: SMG, v_from: int, v_to: int) -> Optional[list[int]]:
    """A chain of 0+ segments whose entry address is ``v_from`` and whose
    last link field stores exactly ``v_to``; None when there is no such
    chain."""
    chain: list[int] = []
    v = v_from
    while True:
        trip = g.pt.get(v)
        if trip is None:
            return None
        of, tg, o = trip
        if o == NULL_OBJECT or o in chain:
            return None
        lbl = g.objects[o]
        if not lbl.is_segment or lbl.min_len != 0:
            return None
        if tg is Tg.FST:
            nxt = g.hv.get((o, lbl.nfo, g.ptr_type))
        elif tg is Tg.LST and lbl.kind is ObjKind.DLS:
            nxt = g.hv.get((o, lbl.pfo, g.ptr_type))
        else:
            return None
        chain.append(o)
        if nxt == v_to:
            return chain
        if nxt is None:
            return None
        v = nxt


def _fst_lst_same_segment(g: SMG, v1: int, v2: int) -> Optional[int]:
    t1 = g.pt.get(v1)
    t2 = g.pt.get(v2)
    if t1 is None or t2 is None:
        return None
    if t1[2] != t2[2]:
        return None
    if {t1[1], t2[1]} != {Tg.FST, Tg.LST}:
        return None
    return t1[2]


def assume(c: SPC, rel: str, v1: int, v2: int) -> list[SPC]:
    """Configurations restricted to ``v1 rel v2`` (rel is ``eq`` or ``neq``).

    Callers must already have failed to decide the relation.  When no
    supported shape applies the configuration is returned unmodified, which
    is sound (the branch is merely explored with less precision).
    """
    g = c.smg
    if rel == "eq":
        addr1 = g.is_address(v1)
        addr2 = g.is_address(v2)
        if not addr1 or not addr2:
            # a plain value acquires the other side's identity
            if addr1 and not addr2:
                return [SPC(_substitute(g, v2, v1), dict(c.vars))]
            if addr2 and not addr1:
                return [SPC(_substitute(g, v1, v2), dict(c.vars))]
            return [SPC(_substitute(g, v2, v1), dict(c.vars))]
        for a, b in ((v1, v2), (v2, v1)):
            chain = _zero_chain(g, a, b)
            if chain is not None:
                g2 = g
                for d in chain:
                    g2 = remove_zero_segment(g2, d)
                return [SPC(g2, dict(c.vars))]
        d = _fst_lst_same_segment(g, v1, v2)
        if d is not None and g.objects[d].min_len == 1:
            return [SPC(_segment_to_region(g, d), dict(c.vars))]
        return [c]

    assert rel == "neq"
    for a, b in ((v1, v2), (v2, v1)):
        chain = _zero_chain(g, a, b)
        if chain is not None:
            out = []
            for d in chain:
                g2 = g.copy()
                g2.relabel(d, min_len=1)
                out.append(SPC(g2, dict(c.vars)))
            return out
    d = _fst_lst_same_segment(g, v1, v2)
    if d is not None:
        lbl = g.objects[d]
        nxt = g.hv.get((d, lbl.nfo, g.ptr_type))
        prv = g.hv.get((d, lbl.pfo, g.ptr_type)) if lbl.pfo is not None \
            else None
        if lbl.min_len == 1 or (nxt is not None and nxt == prv):
            g2 = g.copy()
            g2.relabel(d, min_len=2)
            return [SPC(g2, dict(c.vars))]
    return [c]


def _segment_to_region(g: SMG, d: int) -> SMG:
    """Rewrite a known-singleton segment as a plain region: its private
    sub-heap surfaces one level up and its end addresses collapse."""
    g = g.copy()
    lbl = g.objects[d]
    nobjs, nvals = g.nested_sub_smg(d)
    for o in nobjs - {d}:
        g.relabel(o, level=g.objects[o].level - 1)
    for v in nvals:
        g.values[v] -= 1

    a_f = g.find_address(lbl.hfo, Tg.FST, d)
    a_l = g.find_address(lbl.hfo, Tg.LST, d)
    if a_f is not None and a_l is not None:
        for key, v in list(g.hv.items()):
            if v == a_l:
                g.hv[key] = a_f
        g.remove_values([a_l])
    keep = a_f if a_f is not None else a_l
    if keep is not None:
        g.pt[keep] = (lbl.hfo, Tg.REG, d)
    for v, (of, tg, o) in list(g.pt.items()):
        if o == d and tg is Tg.ALL:
            g.pt[v] = (of, Tg.REG, d)
    g.objects[d] = ObjLabel.region(lbl.size, level=lbl.level, valid=True)
    return g
