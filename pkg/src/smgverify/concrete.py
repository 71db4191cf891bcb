"""Bounded concretisation: enumerating the memory graphs an SMG stands for.

A memory graph (MG) is an SMG without list segments.  The graphs denoted by
an SMG are obtained by materialising every segment some number of times and
then removing the 0+ leftovers; bounding the per-segment expansion count by
``k`` makes the set finite and usable as a differential-testing semantics.

Canonical form makes set membership meaningful: zero-valued edges collapse
to maximal byte runs, edges to values that occur once and constrain nothing
are dropped, and nodes are renumbered breadth-first from the named roots so
isomorphic graphs freeze to the identical tuple.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .smg import (
    BudgetExceeded,
    FieldKind,
    FieldType,
    NULL_OBJECT,
    ObjKind,
    SMG,
    SPC,
    Tg,
    ZERO,
    materialise,
    remove_zero_segment,
)

DEFAULT_GRAPH_CAP = 4096

CanonMG = tuple  # frozen nested tuples; hashable and comparable


def canonical_mg(g: SMG, roots: list[tuple[str, int]]) -> CanonMG:
    """Freeze a segment-free graph into its canonical tuple.

    Roots are (name, object) pairs; the breadth-first walk from them, with
    edges taken in (offset, size, kind) order, fixes the numbering, so any
    two isomorphic graphs yield equal tuples.  Nodes unreachable from the
    roots are dropped (the null object and the zero value always stay).
    """
    assert not g.segments(), "canonical form is defined for MGs only"

    # zero edges -> maximal byte runs per object
    zero_runs: dict[int, list[tuple[int, int]]] = {}
    edges: dict[int, list[tuple[int, FieldType, int]]] = {o: []
                                                          for o in g.objects}
    occurrences: dict[int, int] = {}
    for (o, of, ty), v in g.hv.items():
        if v == ZERO:
            continue
        occurrences[v] = occurrences.get(v, 0) + 1
    for o in g.objects:
        bs: set[int] = set()
        for of, ty, v in g.fields_of(o):
            if v == ZERO:
                bs.update(range(of, of + ty.size))
            elif g.is_address(v) or occurrences.get(v, 0) > 1:
                edges[o].append((of, ty, v))
            # single-occurrence plain values constrain nothing: dropped
        rs = []
        for b in sorted(bs):
            if rs and rs[-1][0] + rs[-1][1] == b:
                rs[-1] = (rs[-1][0], rs[-1][1] + 1)
            else:
                rs.append((b, 1))
        zero_runs[o] = rs

    onum: dict[int, int] = {NULL_OBJECT: 0}
    vnum: dict[int, int] = {ZERO: 0}
    out_objects: list[tuple] = []
    out_values: list[tuple] = []
    out_h: list[tuple] = []
    out_p: list[tuple] = []

    def visit_value(v: int) -> int:
        if v in vnum:
            return vnum[v]
        vnum[v] = len(vnum)
        out_values.append((vnum[v], g.values[v]))
        queue.append((v, False))
        return vnum[v]

    def visit_object(o: int) -> int:
        if o in onum:
            return onum[o]
        onum[o] = len(onum)
        lbl = g.objects[o]
        out_objects.append((onum[o], lbl.kind.value, lbl.size, lbl.level,
                            lbl.valid))
        queue.append((o, True))
        return onum[o]

    queue: list[tuple[int, bool]] = []
    root_list = sorted(roots)
    for _, oid in root_list:
        visit_object(oid)
    idx = 0
    while idx < len(queue):
        node, is_obj = queue[idx]
        idx += 1
        if is_obj:
            for start, length in zero_runs[node]:
                out_h.append((onum[node], start, FieldKind.DATA.value,
                              length, 0))
            for of, ty, v in edges[node]:
                n = visit_value(v)
                out_h.append((onum[node], of, ty.kind.value, ty.size, n))
        else:
            trip = g.pt.get(node)
            if trip is not None:
                of, tg, o = trip
                n = visit_object(o)
                out_p.append((vnum[node], of, tg.value, n))

    return (
        "mg",
        g.ptr_size,
        tuple(sorted(out_objects)),
        tuple(sorted(out_values)),
        tuple(sorted(out_h)),
        tuple(sorted(out_p)),
        tuple(sorted((name, onum[oid]) for name, oid in root_list)),
    )


def concretise_bounded(g: SMG, k: int,
                       roots: Optional[list[tuple[str, int]]] = None,
                       cap: int = DEFAULT_GRAPH_CAP,
                       end: str = "front") -> frozenset:
    """All canonical MGs reachable by expanding each segment between its
    minimum length and ``k`` nodes.

    The result is a set, so it does not depend on expansion order (checked
    by tests via the ``end`` knob).  Raises :class:`BudgetExceeded` past
    ``cap`` graphs.
    """
    if roots is None:
        roots = [(f"_r{oid}", oid) for oid in sorted(g.objects)
                 if oid != NULL_OBJECT]
    out: set[CanonMG] = set()
    counts0 = {d: 0 for d in g.segments()}
    stack: list[tuple[SMG, dict[int, int]]] = [(g.copy(), counts0)]
    while stack:
        cur, counts = stack.pop()
        segs = [d for d in cur.segments() if cur.objects[d].level == 0]
        if not segs:
            assert not cur.segments(), "nested segment without a parent"
            out.add(canonical_mg(cur, roots))
            if len(out) > cap:
                raise BudgetExceeded(f"more than {cap} concretisations")
            continue
        d = segs[0]
        lbl = cur.objects[d]
        if lbl.min_len == 0:
            stack.append((remove_zero_segment(cur, d), counts))
        if counts.get(d, 0) < k:
            seg_end = end if lbl.kind is ObjKind.DLS else "front"
            g2, _ = materialise(cur, d, seg_end)
            counts2 = dict(counts)
            counts2[d] = counts2.get(d, 0) + 1
            stack.append((g2, counts2))
    return frozenset(out)


def concretise_spc(c: SPC, k: int, cap: int = DEFAULT_GRAPH_CAP,
                   end: str = "front") -> frozenset:
    """Bounded concretisation of a configuration, rooted at its variables."""
    return concretise_bounded(c.smg, k, sorted(c.vars.items()), cap, end)
