"""Symbolic memory graphs: the abstract heap representation.

An SMG is a bipartite directed graph over *objects* (allocated memory:
regions, doubly/singly-linked list segments) and *values* (addresses and
other data).  Two edge families connect them:

  * has-value edges  ``H(object, offset, field_type) = value`` -- the field
    of an object at a byte offset holds a value; fields may overlap;
  * points-to edges  ``P(value) = (offset, target_specifier, object)`` -- an
    address value points at a byte offset of an object.  The target
    specifier (``fst``/``lst``/``all``/``reg``) selects which concrete nodes
    of a list segment the address denotes.

Object 0 is the reserved null object, value 0 the reserved zero value, and
``0 ->(0,reg) #`` is always present.  A symbolic program configuration (SPC)
pairs an SMG with an injective variable-to-region map.

All operations here are pure: they take a graph, return a new graph, and
never mutate their input, so instances can be shared freely across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

NULL_OBJECT = 0  #: object id of the null object
ZERO = 0         #: value id of the zero value (the null address)


class SmgError(Exception):
    """Base class for graph-level operation errors."""


class NotASegment(SmgError):
    pass


class BackOnSLS(SmgError):
    pass


class NonZeroLength(SmgError):
    pass


class OutOfBounds(SmgError):
    pass


class InvalidTarget(SmgError):
    pass


class BudgetExceeded(SmgError):
    pass


class ObjKind(str, enum.Enum):
    REGION = "reg"
    DLS = "dls"  # doubly-linked list segment
    SLS = "sls"  # singly-linked list segment


class FieldKind(str, enum.Enum):
    PTR = "ptr"
    DATA = "data"


class Tg(str, enum.Enum):
    """Points-to target specifiers."""

    FST = "fst"
    LST = "lst"
    ALL = "all"
    REG = "reg"


@dataclass(frozen=True)
class FieldType:
    """A field type is just pointer-ness plus a byte size."""

    kind: FieldKind
    size: int

    @staticmethod
    def ptr(size: int) -> "FieldType":
        return FieldType(FieldKind.PTR, size)

    @staticmethod
    def data(size: int) -> "FieldType":
        return FieldType(FieldKind.DATA, size)

    def __str__(self) -> str:
        return "ptr" if self.kind is FieldKind.PTR else f"data{self.size}"


@dataclass(frozen=True)
class ObjLabel:
    """Labelling of one object.

    ``min_len`` is the minimum number of concrete nodes a segment stands
    for; ``hfo``/``nfo``/``pfo`` are the head/next/prev field offsets of
    segments.  SLS labels carry no ``pfo``.
    """

    kind: ObjKind
    size: int
    level: int = 0
    valid: bool = True
    min_len: int = 0
    hfo: int = 0
    nfo: int = 0
    pfo: Optional[int] = None

    @property
    def is_segment(self) -> bool:
        return self.kind is not ObjKind.REGION

    @property
    def len_prime(self) -> int:
        """Minimum length with regions counting as exactly one node."""
        return self.min_len if self.is_segment else 1

    @staticmethod
    def region(size: int, level: int = 0, valid: bool = True) -> "ObjLabel":
        return ObjLabel(ObjKind.REGION, size, level, valid)

    @staticmethod
    def dls(size: int, min_len: int, hfo: int, nfo: int, pfo: int,
            level: int = 0) -> "ObjLabel":
        return ObjLabel(ObjKind.DLS, size, level, True, min_len, hfo, nfo, pfo)

    @staticmethod
    def sls(size: int, min_len: int, hfo: int, nfo: int,
            level: int = 0) -> "ObjLabel":
        return ObjLabel(ObjKind.SLS, size, level, True, min_len, hfo, nfo, None)


NULL_LABEL = ObjLabel(ObjKind.REGION, size=0, level=0, valid=False)


@dataclass(frozen=True)
class Violation:
    """One broken consistency clause."""

    code: str
    detail: str
    node: Optional[int] = None

    def __str__(self) -> str:
        where = f" (node {self.node})" if self.node is not None else ""
        return f"{self.code}: {self.detail}{where}"


@dataclass
class SMG:
    """The graph itself.  Construct via :meth:`empty`, mutate via helpers.

    ``hv`` maps ``(object, offset, field_type)`` to a value id; ``pt`` maps
    an address value id to ``(offset, specifier, object)`` and is kept
    injective on its triples.  Ids come from per-graph monotone counters and
    are never reused, so allocation order stays recoverable.
    """

    ptr_size: int = 8
    objects: dict[int, ObjLabel] = field(default_factory=dict)
    values: dict[int, int] = field(default_factory=dict)  # value id -> level
    hv: dict[tuple[int, int, FieldType], int] = field(default_factory=dict)
    pt: dict[int, tuple[int, Tg, int]] = field(default_factory=dict)
    next_obj: int = 1
    next_val: int = 1

    # -- construction -------------------------------------------------

    @staticmethod
    def empty(ptr_size: int = 8) -> "SMG":
        g = SMG(ptr_size=ptr_size)
        g.objects[NULL_OBJECT] = NULL_LABEL
        g.values[ZERO] = 0
        g.pt[ZERO] = (0, Tg.REG, NULL_OBJECT)
        return g

    def copy(self) -> "SMG":
        return SMG(
            ptr_size=self.ptr_size,
            objects=dict(self.objects),
            values=dict(self.values),
            hv=dict(self.hv),
            pt=dict(self.pt),
            next_obj=self.next_obj,
            next_val=self.next_val,
        )

    # -- small accessors ----------------------------------------------

    @property
    def ptr_type(self) -> FieldType:
        return FieldType.ptr(self.ptr_size)

    def add_object(self, label: ObjLabel) -> int:
        oid = self.next_obj
        self.next_obj += 1
        self.objects[oid] = label
        return oid

    def add_value(self, level: int = 0) -> int:
        vid = self.next_val
        self.next_val += 1
        self.values[vid] = level
        return vid

    def relabel(self, oid: int, **changes) -> None:
        self.objects[oid] = replace(self.objects[oid], **changes)

    def fields_of(self, o: int) -> list[tuple[int, FieldType, int]]:
        """Has-value edges leaving ``o``, sorted for determinism."""
        out = [(of, ty, v) for (oo, of, ty), v in self.hv.items() if oo == o]
        out.sort(key=lambda e: (e[0], e[1].size, e[1].kind.value))
        return out

    def set_field(self, o: int, of: int, ty: FieldType, v: int) -> None:
        self.hv[(o, of, ty)] = v

    def del_field(self, o: int, of: int, ty: FieldType) -> None:
        self.hv.pop((o, of, ty), None)

    def install_field(self, o: int, of: int, ty: FieldType, v: int) -> None:
        """Store ``v`` in a field, keeping overlapping views sound in
        place: overlapping non-zero edges are dropped and overlapping zero
        edges survive as their parts outside the written window (writing 0
        keeps them whole)."""
        if self.hv.get((o, of, ty)) == v:
            return
        lo, hi = of, of + ty.size
        for eof, ety, ev in self.fields_of(o):
            elo, ehi = eof, eof + ety.size
            if ehi <= lo or hi <= elo:
                continue
            if ev != 0:
                self.del_field(o, eof, ety)
            elif v != 0:
                self.del_field(o, eof, ety)
                if elo < lo:
                    self.set_field(o, elo, FieldType.data(lo - elo), 0)
                if hi < ehi:
                    self.set_field(o, hi, FieldType.data(ehi - hi), 0)
        self.set_field(o, of, ty, v)

    def is_address(self, v: int) -> bool:
        return v in self.pt

    def find_address(self, of: int, tg: Tg, o: int) -> Optional[int]:
        for v, triple in self.pt.items():
            if triple == (of, tg, o):
                return v
        return None

    def addresses_of(self, o: int) -> list[int]:
        return sorted(v for v, (_, _, oo) in self.pt.items() if oo == o)

    def segments(self) -> list[int]:
        return sorted(o for o, l in self.objects.items() if l.is_segment)

    def value_level(self, v: int) -> int:
        return self.values[v]

    def link_offsets(self, o: int) -> set[int]:
        """Offsets of the next/prev linking fields of a segment."""
        lbl = self.objects[o]
        if not lbl.is_segment:
            return set()
        offs = {lbl.nfo}
        if lbl.pfo is not None:
            offs.add(lbl.pfo)
        return offs

    # -- node removal ---------------------------------------------------

    def remove_objects(self, doomed: Iterable[int]) -> None:
        doomed = set(doomed)
        for o in doomed:
            del self.objects[o]
        for key in [k for k in self.hv if k[0] in doomed]:
            del self.hv[key]

    def remove_values(self, doomed: Iterable[int]) -> None:
        doomed = set(doomed)
        for v in doomed:
            del self.values[v]
            self.pt.pop(v, None)

    # -- reachability ---------------------------------------------------

    def successors(self, node: int, is_object: bool) -> list[tuple[int, bool]]:
        """Neighbours of a node as (id, is_object) pairs, in sorted order."""
        if is_object:
            return [(v, False) for _, _, v in self.fields_of(node)]
        triple = self.pt.get(node)
        return [(triple[2], True)] if triple is not None else []

    def reach(self, seed_objects: Iterable[int] = (),
              seed_values: Iterable[int] = (),
              skip_values: frozenset[int] = frozenset(),
              level_floor: Optional[int] = None,
              ) -> tuple[set[int], set[int]]:
        """Objects and values reachable from the seeds.

        ``skip_values`` are never entered (nor anything only beyond them).
        With ``level_floor`` set, only nodes of a strictly higher level than
        the floor are entered (the seeds are always included).
        """
        objs: set[int] = set()
        vals: set[int] = set()
        stack: list[tuple[int, bool]] = [(o, True) for o in sorted(seed_objects)]
        stack += [(v, False) for v in sorted(seed_values)]
        for node, is_obj in stack:
            (objs if is_obj else vals).add(node)
        while stack:
            node, is_obj = stack.pop()
            for nxt, nxt_is_obj in self.successors(node, is_obj):
                if not nxt_is_obj and nxt in skip_values:
                    continue
                seen = objs if nxt_is_obj else vals
                if nxt in seen:
                    continue
                lvl = (self.objects[nxt].level if nxt_is_obj
                       else self.values[nxt])
                if level_floor is not None and lvl <= level_floor:
                    continue
                seen.add(nxt)
                stack.append((nxt, nxt_is_obj))
        return objs, vals

    def nested_sub_smg(self, d: int) -> tuple[set[int], set[int]]:
        """The sub-SMG nested below segment ``d``: ``d`` plus every node of
        a higher level reachable from it through higher-level nodes only."""
        return self.reach(seed_objects=[d], level_floor=self.objects[d].level)

    def restricted_sub_smg(self, o: int, excluded_offsets: set[int]
                           ) -> tuple[set[int], set[int]]:
        """Sub-SMG rooted at ``o`` minus the addresses stored in the given
        pointer fields of ``o`` (and whatever is reachable only via them)."""
        skip = set()
        for of in excluded_offsets:
            v = self.hv.get((o, of, self.ptr_type))
            if v is not None:
                skip.add(v)
        return self.reach(seed_objects=[o], skip_values=frozenset(skip))


@dataclass
class SPC:
    """Symbolic program configuration: an SMG plus variable regions."""

    smg: SMG
    vars: dict[str, int] = field(default_factory=dict)

    def copy(self) -> "SPC":
        return SPC(self.smg.copy(), dict(self.vars))

    def stack_objects(self) -> set[int]:
        return set(self.vars.values())


def empty_spc(ptr_size: int = 8) -> SPC:
    """The empty configuration: null object, zero value, no variables."""
    return SPC(SMG.empty(ptr_size))


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------


def zero_plus_cycle(g: SMG) -> bool:
    """True iff the graph has a cyclic path through 0+ segments (and their
    addresses) only.  Such a cycle would denote an address of no object."""
    zero_segs = {o for o, l in g.objects.items()
                 if l.is_segment and l.min_len == 0}
    adj: dict[int, set[int]] = {d: set() for d in zero_segs}
    for (o, _, _), v in g.hv.items():
        if o in zero_segs and v in g.pt:
            tgt = g.pt[v][2]
            if tgt in zero_segs:
                adj[o].add(tgt)
    color: dict[int, int] = {}

    def dfs(n: int) -> bool:
        color[n] = 1
        for m in sorted(adj[n]):
            c = color.get(m, 0)
            if c == 1 or (c == 0 and dfs(m)):
                return True
        color[n] = 2
        return False

    return any(color.get(d, 0) == 0 and dfs(d) for d in sorted(zero_segs))


def _compute_parents(g: SMG) -> dict[int, set[int]]:
    """For each object, the set of segments it is nested below."""
    parents: dict[int, set[int]] = {o: set() for o in g.objects}
    for d, lbl in g.objects.items():
        if not lbl.is_segment:
            continue
        objs, _ = g.nested_sub_smg(d)
        for o in objs - {d}:
            parents[o].add(d)
    return parents


def check_consistency(g: SMG) -> list[Violation]:
    """Check every consistency clause; one violation per broken clause."""
    out: list[Violation] = []
    bad = out.append

    # referential sanity
    for (o, of, ty), v in g.hv.items():
        if o not in g.objects or v not in g.values:
            bad(Violation("DanglingEdge", f"H({o},{of},{ty}) -> {v}"))
        if of < 0:
            bad(Violation("NegativeFieldOffset", f"H({o},{of},{ty})", o))
        if ty.size < 1:
            bad(Violation("EmptyField", f"H({o},{of},{ty})", o))
    for v, (of, tg, o) in g.pt.items():
        if v not in g.values or o not in g.objects:
            bad(Violation("DanglingEdge", f"P({v}) -> ({of},{tg},{o})"))
    triples = list(g.pt.values())
    if len(triples) != len(set(triples)):
        bad(Violation("NonInjectiveP", "two addresses share one target triple"))

    # basic object consistency
    nl = g.objects.get(NULL_OBJECT)
    if nl is None or nl.valid or nl.size != 0 or nl.level != 0 \
            or nl.kind is not ObjKind.REGION:
        bad(Violation("NullObjectLabel", "null object must be an invalid "
                      "0-sized level-0 region", NULL_OBJECT))
    if g.pt.get(ZERO) != (0, Tg.REG, NULL_OBJECT):
        bad(Violation("ZeroAddress", "value 0 must point to the null object "
                      "at offset 0"))
    for o, lbl in g.objects.items():
        if lbl.is_segment and not lbl.valid:
            bad(Violation("InvalidSegment", "segments are always valid", o))
        if lbl.kind is ObjKind.DLS and lbl.pfo is None:
            bad(Violation("DlsWithoutPfo", "DLS needs a prev offset", o))
        if lbl.kind is ObjKind.SLS and lbl.pfo is not None:
            bad(Violation("SlsWithPfo", "SLS carries no prev offset", o))
        if o != NULL_OBJECT and not lbl.valid and not lbl.is_segment:
            if any(oo == o for (oo, _, _) in g.hv):
                bad(Violation("InvalidRegionEdge",
                              "invalid regions have no outgoing edges", o))

    # field consistency
    for (o, of, ty), _ in g.hv.items():
        lbl = g.objects.get(o)
        if lbl is not None and of + ty.size > lbl.size:
            bad(Violation("FieldBounds",
                          f"field ({of},{ty}) exceeds size {lbl.size}", o))
        if ty.kind is FieldKind.PTR and ty.size != g.ptr_size:
            bad(Violation("PtrSize",
                          f"pointer field of size {ty.size}", o))

    # DLS/SLS consistency
    pt_ty = g.ptr_type
    for o, lbl in g.objects.items():
        if not lbl.is_segment:
            continue
        if g.hv.get((o, lbl.nfo, pt_ty)) is None:
            bad(Violation("SegmentNextMissing", "segment has no next pointer", o))
        if lbl.kind is ObjKind.DLS:
            if lbl.pfo is not None and g.hv.get((o, lbl.pfo, pt_ty)) is None:
                bad(Violation("DlsPrevMissing", "DLS has no prev pointer", o))
            if lbl.pfo is not None and not lbl.nfo < lbl.pfo:
                bad(Violation("NfoPfoOrder", "next offset must precede prev "
                              "offset", o))
    for v, (of, tg, o) in g.pt.items():
        lbl = g.objects.get(o)
        if lbl is None:
            continue
        if (tg is Tg.REG) != (lbl.kind is ObjKind.REGION):
            bad(Violation("SpecifierKind",
                          f"{tg.value} specifier vs {lbl.kind.value} target", v))
        if tg in (Tg.FST, Tg.LST) and lbl.is_segment and of != lbl.hfo:
            bad(Violation("HeadOffset",
                          f"{tg.value} edge must use the head offset", v))
        if tg is Tg.LST and lbl.kind is ObjKind.SLS:
            bad(Violation("LstOnSls", "lst never targets an SLS", v))
        # nesting levels of addresses
        if tg is Tg.ALL:
            if g.values[v] != lbl.level + 1:
                bad(Violation("AllLevel", "all-address must sit one level "
                              "below its target", v))
        else:
            if g.values[v] != lbl.level:
                bad(Violation("SpecifierLevel", "address level must equal "
                              "target level", v))

    if zero_plus_cycle(g):
        bad(Violation("ZeroPlusCycle",
                      "cyclic path through 0+ segments only"))

    # nesting consistency
    parents = _compute_parents(g)
    for o, lbl in g.objects.items():
        if lbl.level <= 0:
            continue
        direct = {d for d in parents[o]
                  if g.objects[d].level == lbl.level - 1}
        if len(direct) != 1:
            bad(Violation("NestingParent",
                          f"object of level {lbl.level} has {len(direct)} "
                          "parent segments", o))
    ancestor: dict[int, set[int]] = {o: set(ps) for o, ps in parents.items()}
    for (o, _, _), v in g.hv.items():
        trip = g.pt.get(v)
        if trip is None:
            continue
        _, tg, o2 = trip
        if o in g.objects and o2 in g.objects \
                and g.objects[o].level > g.objects[o2].level:
            if (tg is Tg.ALL) != (o2 in ancestor.get(o, set())):
                bad(Violation("BackPointer",
                              "level-descending edge must be an all-edge to "
                              "an ancestor segment", o))
    return out


# ---------------------------------------------------------------------------
# Materialisation / removal / garbage collection
# ---------------------------------------------------------------------------


def materialise(g: SMG, d: int, end: str = "front") -> tuple[SMG, int]:
    """Pull one concrete region out of segment ``d``.

    ``front`` detaches the node addressed via ``fst`` (following the next
    offset), ``back`` the ``lst`` node of a DLS.  The fresh region receives
    its own copy of the sub-SMG nested below ``d`` (levels decreased by
    one); level-0 field values are shared between the copy and the rest of
    the segment; ``min_len`` drops by one when positive.
    """
    lbl = g.objects.get(d)
    if lbl is None or not lbl.is_segment:
        raise NotASegment(f"object {d} is not a list segment")
    if lbl.level != 0:
        raise NotASegment(f"segment {d} is not at level 0")
    if end not in ("front", "back"):
        raise ValueError(end)
    if end == "back" and lbl.kind is ObjKind.SLS:
        raise BackOnSLS("an SLS has no last-node address")

    g = g.copy()
    pt_ty = g.ptr_type
    nobjs, nvals = g.nested_sub_smg(d)

    r = g.add_object(ObjLabel.region(lbl.size, level=0, valid=True))
    omap: dict[int, int] = {d: r}
    vmap: dict[int, int] = {}
    for o in sorted(nobjs - {d}):
        src = g.objects[o]
        omap[o] = g.add_object(replace(src, level=src.level - 1))
    for v in sorted(nvals):
        vmap[v] = g.add_value(g.values[v] - 1)

    for o in sorted(nobjs):
        for of, ty, v in g.fields_of(o):
            if v in vmap:
                g.set_field(omap[o], of, ty, vmap[v])
            else:
                # shared value between the copy and the remaining segment
                assert g.values[v] == 0, \
                    "non-level-0 value escaping a nested sub-SMG"
                g.set_field(omap[o], of, ty, v)
    for v in sorted(nvals):
        trip = g.pt.get(v)
        if trip is None:
            continue
        of, tg, o = trip
        if o == d:
            g.pt[vmap[v]] = (of, Tg.REG, r)
        else:
            assert o in omap, "nested address targeting a non-nested object"
            g.pt[vmap[v]] = (of, tg, omap[o])

    a_n = g.hv[(d, lbl.nfo, pt_ty)]
    a_p = g.hv[(d, lbl.pfo, pt_ty)] if lbl.kind is ObjKind.DLS else None

    if end == "front":
        a_f = g.find_address(lbl.hfo, Tg.FST, d)
        if a_f is None:
            a_f = g.add_value(0)
        a_d = g.add_value(0)
        g.pt[a_f] = (lbl.hfo, Tg.REG, r)
        if lbl.kind is ObjKind.DLS:
            g.install_field(r, lbl.pfo, pt_ty, a_p)
            g.install_field(d, lbl.pfo, pt_ty, a_f)
        g.install_field(r, lbl.nfo, pt_ty, a_d)
        g.pt[a_d] = (lbl.hfo, Tg.FST, d)
    else:
        a_l = g.find_address(lbl.hfo, Tg.LST, d)
        if a_l is None:
            a_l = g.add_value(0)
        a_d = g.add_value(0)
        g.pt[a_l] = (lbl.hfo, Tg.REG, r)
        g.install_field(r, lbl.nfo, pt_ty, a_n)
        g.install_field(r, lbl.pfo, pt_ty, a_d)
        g.pt[a_d] = (lbl.hfo, Tg.LST, d)
        g.install_field(d, lbl.nfo, pt_ty, a_l)

    if lbl.min_len > 0:
        g.relabel(d, min_len=lbl.min_len - 1)
    return g, r


def remove_zero_segment(g: SMG, d: int) -> SMG:
    """Remove a possibly-empty (0+) segment: redirect the edges holding its
    first/last addresses to its next/prev values and drop its nested part."""
    lbl = g.objects.get(d)
    if lbl is None or not lbl.is_segment:
        raise NotASegment(f"object {d} is not a list segment")
    if lbl.min_len != 0:
        raise NonZeroLength(f"segment {d} has minimum length {lbl.min_len}")

    g = g.copy()
    pt_ty = g.ptr_type
    a_n = g.hv[(d, lbl.nfo, pt_ty)]
    a_p = g.hv[(d, lbl.pfo, pt_ty)] if lbl.kind is ObjKind.DLS else None
    a_f = g.find_address(lbl.hfo, Tg.FST, d)
    a_l = g.find_address(lbl.hfo, Tg.LST, d) if lbl.kind is ObjKind.DLS else None

    for key, v in list(g.hv.items()):
        if a_f is not None and v == a_f:
            g.hv[key] = a_n
        elif a_l is not None and v == a_l:
            g.hv[key] = a_p

    nobjs, nvals = g.nested_sub_smg(d)
    doomed_vals = set(nvals)
    for a in (a_f, a_l):
        if a is not None:
            doomed_vals.add(a)
    g.remove_objects(nobjs)
    g.remove_values(doomed_vals)

    for key, v in g.hv.items():
        assert v not in doomed_vals, \
            f"surviving edge {key} references a removed value"
    for v, (_, _, o) in g.pt.items():
        assert o not in nobjs, \
            f"surviving address {v} targets a removed object"
    return g


def collect_garbage(c: SPC) -> tuple[SPC, list[int]]:
    """Drop heap objects (and values) unreachable from any variable region.

    Returns the cleaned configuration and the removed object ids; the caller
    decides which of them count as leaks (valid ones do).
    """
    g = c.smg
    live_o, live_v = g.reach(seed_objects=sorted(set(c.vars.values())))
    live_o.add(NULL_OBJECT)
    live_v.add(ZERO)
    dead_o = sorted(set(g.objects) - live_o)
    dead_v = sorted(set(g.values) - live_v)
    if not dead_o and not dead_v:
        return c, []
    g = g.copy()
    g.remove_objects(dead_o)
    g.remove_values(dead_v)
    return SPC(g, dict(c.vars)), dead_o
