"""Graphviz export of configurations, plus a structural re-parser.

Objects render as boxes labelled ``kind/size/len/level/valid``, values as
circles, has-value edges as ``of,ty`` arrows, points-to edges as ``of,tg``
arrows; variables appear as plaintext nodes wired to their regions.  The
re-parser recovers node and edge counts and labels so round-trip tests can
check the export without a graphviz dependency.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .smg import SPC, ZERO


def _obj_label(lbl) -> str:
    ln = f"{lbl.min_len}+" if lbl.is_segment else "-"
    return (f"{lbl.kind.value}/{lbl.size}/{ln}/{lbl.level}/"
            f"{'valid' if lbl.valid else 'invalid'}")


def spc_to_dot(c: SPC, name: str = "spc") -> str:
    g = c.smg
    lines = [f"digraph {name} {{"]
    for o in sorted(g.objects):
        lines.append(f'  o{o} [shape=box, label="o{o}: '
                     f'{_obj_label(g.objects[o])}"];')
    for v in sorted(g.values):
        lines.append(f'  v{v} [shape=circle, label="v{v}"];')
    for (o, of, ty), v in sorted(g.hv.items(),
                                 key=lambda kv: (kv[0][0], kv[0][1],
                                                 kv[0][2].size)):
        lines.append(f'  o{o} -> v{v} [label="{of},{ty}"];')
    for v, (of, tg, o) in sorted(g.pt.items()):
        lines.append(f'  v{v} -> o{o} [label="{of},{tg.value}", '
                     'style=dashed];')
    for x, r in sorted(c.vars.items()):
        lines.append(f'  var_{x} [shape=plaintext, label="{x}"];')
        lines.append(f'  var_{x} -> o{r} [style=dotted];')
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class DotSummary:
    objects: dict[str, str]       # node name -> label
    values: list[str]
    hv_edges: list[tuple[str, str, str]]   # (src, dst, label)
    pt_edges: list[tuple[str, str, str]]
    var_edges: list[tuple[str, str]]


_NODE_RE = re.compile(r'^\s*(\w+)\s*\[shape=(\w+), label="([^"]*)"\];')
_EDGE_RE = re.compile(r'^\s*(\w+)\s*->\s*(\w+)\s*(?:\[label="([^"]*)"'
                      r'(?:, style=\w+)?\])?\s*(?:\[style=\w+\])?;')


def parse_dot(text: str) -> DotSummary:
    """Structural summary of a graph emitted by :func:`spc_to_dot`."""
    objects: dict[str, str] = {}
    values: list[str] = []
    hv: list[tuple[str, str, str]] = []
    pt: list[tuple[str, str, str]] = []
    var_edges: list[tuple[str, str]] = []
    for line in text.splitlines():
        m = _NODE_RE.match(line)
        if m:
            node, shape, label = m.groups()
            if shape == "box":
                objects[node] = label
            elif shape == "circle":
                values.append(node)
            continue
        m = _EDGE_RE.match(line)
        if m:
            src, dst, label = m.groups()
            if src.startswith("var_"):
                var_edges.append((src, dst))
            elif src.startswith("o"):
                hv.append((src, dst, label or ""))
            else:
                pt.append((src, dst, label or ""))
    return DotSummary(objects, values, hv, pt, var_edges)
