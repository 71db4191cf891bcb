"""Field reinterpretation for nullified memory blocks.

Fields of one object may overlap.  Reads and writes therefore rewrite the
has-value edge set so that every view of the same bytes stays sound:

  * :func:`read_value` installs an edge for the requested field, yielding 0
    when every byte is covered by zero edges and a fresh unknown otherwise;
    the graph's meaning is unchanged.
  * :func:`write_value` removes overlapping non-zero edges and splits or
    shortens overlapping zero edges around the written field; the result
    over-approximates the original graph.
  * :func:`join_fields` aligns the field sets of two objects before a join:
    zero edges are reduced to the byte ranges nullified on both sides (kept
    as pointer-typed null fields where the other side holds an address), and
    one-sided fields get fresh unknown counterparts.  The returned status
    records which side lost zero information.
"""

from __future__ import annotations

import enum
from typing import Optional

from .smg import (
    SMG,
    FieldKind,
    FieldType,
    InvalidTarget,
    OutOfBounds,
    ZERO,
)


class JoinStatus(enum.Enum):
    """Semantic relation between two joined graphs.

    EQUAL: same meaning; SUPSET: the left graph covers the right;
    SUBSET: the right covers the left; INCOMPARABLE: neither.
    """

    EQUAL = "="
    SUPSET = ">"
    SUBSET = "<"
    INCOMPARABLE = "><"


_STATUS_TABLE = {
    (JoinStatus.EQUAL, JoinStatus.EQUAL): JoinStatus.EQUAL,
    (JoinStatus.EQUAL, JoinStatus.SUPSET): JoinStatus.SUPSET,
    (JoinStatus.EQUAL, JoinStatus.SUBSET): JoinStatus.SUBSET,
    (JoinStatus.EQUAL, JoinStatus.INCOMPARABLE): JoinStatus.INCOMPARABLE,
    (JoinStatus.SUPSET, JoinStatus.EQUAL): JoinStatus.SUPSET,
    (JoinStatus.SUPSET, JoinStatus.SUPSET): JoinStatus.SUPSET,
    (JoinStatus.SUPSET, JoinStatus.SUBSET): JoinStatus.INCOMPARABLE,
    (JoinStatus.SUPSET, JoinStatus.INCOMPARABLE): JoinStatus.INCOMPARABLE,
    (JoinStatus.SUBSET, JoinStatus.EQUAL): JoinStatus.SUBSET,
    (JoinStatus.SUBSET, JoinStatus.SUPSET): JoinStatus.INCOMPARABLE,
    (JoinStatus.SUBSET, JoinStatus.SUBSET): JoinStatus.SUBSET,
    (JoinStatus.SUBSET, JoinStatus.INCOMPARABLE): JoinStatus.INCOMPARABLE,
    (JoinStatus.INCOMPARABLE, JoinStatus.EQUAL): JoinStatus.INCOMPARABLE,
    (JoinStatus.INCOMPARABLE, JoinStatus.SUPSET): JoinStatus.INCOMPARABLE,
    (JoinStatus.INCOMPARABLE, JoinStatus.SUBSET): JoinStatus.INCOMPARABLE,
    (JoinStatus.INCOMPARABLE, JoinStatus.INCOMPARABLE):
        JoinStatus.INCOMPARABLE,
}


def update_join_status(s1: JoinStatus, s2: JoinStatus) -> JoinStatus:
    """Combine the running status with the status of the current step.

    Monotone: one-sided statuses never return to EQUAL and INCOMPARABLE is
    absorbing.
    """
    return _STATUS_TABLE[(s1, s2)]


# ---------------------------------------------------------------------------
# byte-interval helpers
# ---------------------------------------------------------------------------


def interval(of: int, ty: FieldType) -> tuple[int, int]:
    return of, of + ty.size


def zero_edges_of(g: SMG, o: int) -> list[tuple[int, FieldType]]:
    return [(of, ty) for of, ty, v in g.fields_of(o) if v == ZERO]


def zero_bytes_of(g: SMG, o: int) -> set[int]:
    bs: set[int] = set()
    for of, ty in zero_edges_of(g, o):
        bs.update(range(of, of + ty.size))
    return bs


def runs(byte_set: set[int]) -> list[tuple[int, int]]:
    """Maximal runs of a byte set as (start, length) pairs."""
    out: list[tuple[int, int]] = []
    for b in sorted(byte_set):
        if out and out[-1][0] + out[-1][1] == b:
            out[-1] = (out[-1][0], out[-1][1] + 1)
        else:
            out.append((b, 1))
    return out


def _check_field(g: SMG, o: int, of: int, ty: FieldType) -> None:
    lbl = g.objects.get(o)
    if lbl is None or not lbl.valid:
        raise InvalidTarget(f"object {o} is absent or invalid")
    if of < 0 or of + ty.size > lbl.size:
        raise OutOfBounds(
            f"field ({of},{ty}) exceeds object of size {lbl.size}")


def _fresh_level(g: SMG, o: int) -> int:
    """Level of a fresh unknown stored in a field of ``o``: values private
    to a segment node live one level below the segment itself."""
    lbl = g.objects[o]
    return lbl.level + (1 if lbl.is_segment else 0)


# ---------------------------------------------------------------------------
# read / write
# ---------------------------------------------------------------------------


def read_value(g: SMG, o: int, of: int, ty: FieldType) -> tuple[SMG, int]:
    """Install and return a value for the field ``(of, ty)`` of ``o``.

    Keeps the set of represented memories exactly as it was: an existing
    edge is reused, a fully nullified window reads as 0, anything else
    yields a fresh unconstrained value.
    """
    _check_field(g, o, of, ty)
    v = g.hv.get((o, of, ty))
    if v is not None:
        return g, v
    window = set(range(of, of + ty.size))
    if window <= zero_bytes_of(g, o):
        v = ZERO
        g = g.copy()
    else:
        g = g.copy()
        v = g.add_value(_fresh_level(g, o))
    g.set_field(o, of, ty, v)
    return g, v


def write_value(g: SMG, o: int, of: int, ty: FieldType, v: int) -> SMG:
    """Store ``v`` into the field ``(of, ty)`` of ``o``.

    Overlapping non-zero edges are dropped; overlapping zero edges survive
    as their parts outside the written window (unless 0 is being written,
    which just adds another zero view).
    """
    _check_field(g, o, of, ty)
    if g.hv.get((o, of, ty)) == v:
        return g
    g = g.copy()
    if v not in g.values:
        g.values[v] = 0
        g.next_val = max(g.next_val, v + 1)
    g.install_field(o, of, ty, v)
    return g


# ---------------------------------------------------------------------------
# join reinterpretation
# ---------------------------------------------------------------------------


def _minimise_zero_side(g_self: SMG, g_other: SMG, o_self: int, o_other: int
                        ) -> None:
    """One direction of the zero-field reorganisation, in place.

    The zero edges of ``o_self`` are replaced by (a) maximal byte runs
    nullified on both sides and (b) pointer-typed null fields wherever the
    other object stores a non-null address over bytes that are nullified
    here.
    """
    own_zero = zero_edges_of(g_self, o_self)
    own_zero_bytes: set[int] = set()
    for of, ty in own_zero:
        own_zero_bytes.update(range(of, of + ty.size))
    other_zero_bytes = zero_bytes_of(g_other, o_other)

    for of, ty in own_zero:
        g_self.del_field(o_self, of, ty)
    common = own_zero_bytes & other_zero_bytes
    for start, length in runs(common):
        g_self.set_field(o_self, start, FieldType.data(length), ZERO)

    ptr_ty = g_other.ptr_type
    for of, ty, v in g_other.fields_of(o_other):
        if ty.kind is not FieldKind.PTR or v == ZERO or not g_other.is_address(v):
            continue
        own = g_self.hv.get((o_self, of, ptr_ty))
        if own is not None and own != ZERO and g_self.is_address(own):
            continue
        window = set(range(of, of + ty.size))
        if window <= own_zero_bytes:
            g_self.set_field(o_self, of, ptr_ty, ZERO)


def join_fields_inplace(g1: SMG, g2: SMG, o1: int, o2: int) -> JoinStatus:
    """Align the field sets of ``o1`` and ``o2``, mutating both graphs."""
    assert g1.objects[o1].size == g2.objects[o2].size
    before1 = zero_bytes_of(g1, o1)
    before2 = zero_bytes_of(g2, o2)

    _minimise_zero_side(g1, g2, o1, o2)
    _minimise_zero_side(g2, g1, o2, o1)

    status = JoinStatus.EQUAL
    after1 = zero_bytes_of(g1, o1)
    after2 = zero_bytes_of(g2, o2)
    if before1 - after1:
        status = update_join_status(status, JoinStatus.SUBSET)
    if before2 - after2:
        status = update_join_status(status, JoinStatus.SUPSET)

    fields1 = {(of, ty) for of, ty, _ in g1.fields_of(o1)}
    fields2 = {(of, ty) for of, ty, _ in g2.fields_of(o2)}
    for of, ty in sorted(fields1 - fields2,
                         key=lambda f: (f[0], f[1].size, f[1].kind.value)):
        g2.set_field(o2, of, ty, g2.add_value(_fresh_level(g2, o2)))
    for of, ty in sorted(fields2 - fields1,
                         key=lambda f: (f[0], f[1].size, f[1].kind.value)):
        g1.set_field(o1, of, ty, g1.add_value(_fresh_level(g1, o1)))
    return status


def join_fields(g1: SMG, g2: SMG, o1: int, o2: int
                ) -> tuple[JoinStatus, SMG, SMG]:
    """Pure wrapper around :func:`join_fields_inplace`."""
    g1, g2 = g1.copy(), g2.copy()
    status = join_fields_inplace(g1, g2, o1, o2)
    return status, g1, g2
