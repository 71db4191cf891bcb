"""MIL, the small pointer IR the analyzer consumes.

A program declares untyped pointer-sized variables and a list of labelled
basic blocks.  Instructions cover allocation, frees, loads and stores with
byte offsets and field types, block operations, nondeterministic values,
and control flow::

    vars x, y;
    entry:
      x = malloc(16);
      store [x + 0 : ptr] = y;
      y = load [x + 0 : ptr];
      branch x == y, done, done;
    done:
      exit;

Field types are ``ptr`` or ``dataN`` (N in 1/2/4/8); offsets and sizes are
integer literals; ``//`` starts a comment.  Every block must end in
``branch``/``goto``/``exit`` and all labels must resolve.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

DATA_SIZES = (1, 2, 4, 8)
COND_OPS = ("==", "!=", "<", "<=")


class MilError(Exception):
    """Input-language diagnostic carrying a source position."""

    def __init__(self, msg: str, line: int, col: int = 0) -> None:
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


class MilSyntaxError(MilError):
    pass


class DuplicateLabel(MilError):
    pass


class UnknownVariable(MilError):
    pass


class UnknownLabel(MilError):
    pass


@dataclass(frozen=True)
class Instr:
    """One instruction; unused operand slots stay None.

    ``ty`` holds the source spelling ("ptr"/"dataN"); the analyzer resolves
    it against the run's pointer size.
    """

    op: str
    line: int
    x: Optional[str] = None
    y: Optional[str] = None
    n: Optional[int] = None
    k: Optional[int] = None
    of: Optional[int] = None
    of2: Optional[int] = None
    ty: Optional[str] = None
    cond: Optional[str] = None
    target: Optional[str] = None
    target2: Optional[str] = None

    TERMINATORS = ("branch", "goto", "exit")

    @property
    def is_terminator(self) -> bool:
        return self.op in Instr.TERMINATORS


@dataclass
class Block:
    label: str
    line: int
    instrs: list[Instr] = field(default_factory=list)


@dataclass
class Program:
    variables: list[str]
    blocks: list[Block]

    @property
    def block_index(self) -> dict[str, int]:
        return {b.label: i for i, b in enumerate(self.blocks)}


@dataclass
class CFG:
    program: Program
    succs: list[list[int]]
    preds: list[list[int]]
    loop_heads: set[int]


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|==|!=|[=,;:\[\]()+<])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MilSyntaxError(f"unexpected character {text[pos]!r}",
                                 line, col)
        lexeme = m.group(0)
        kind = m.lastgroup or ""
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]) -> None:
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise MilSyntaxError(f"expected {text!r}, found {t.text!r}",
                                 t.line, t.col)
        return t

    def ident(self, what: str = "identifier") -> _Tok:
        t = self.next()
        if t.kind != "ident":
            raise MilSyntaxError(f"expected {what}, found {t.text!r}",
                                 t.line, t.col)
        return t

    def number(self) -> int:
        t = self.next()
        if t.kind != "num":
            raise MilSyntaxError(f"expected number, found {t.text!r}",
                                 t.line, t.col)
        return int(t.text)


def _check_ty(tok: _Tok) -> str:
    if tok.text == "ptr":
        return "ptr"
    m = re.fullmatch(r"data(\d+)", tok.text)
    if m and int(m.group(1)) in DATA_SIZES:
        return tok.text
    raise MilSyntaxError(f"unknown field type {tok.text!r}", tok.line,
                         tok.col)


def parse_program(text: str) -> Program:
    """Parse MIL source; raises a :class:`MilError` with position info."""
    p = _Parser(_lex(text))
    kw = p.ident("'vars'")
    if kw.text != "vars":
        raise MilSyntaxError("program must start with a vars declaration",
                             kw.line, kw.col)
    variables = [p.ident("variable name").text]
    while p.peek().text == ",":
        p.next()
        variables.append(p.ident("variable name").text)
    p.expect(";")
    seen_vars = set()
    for v in variables:
        if v in seen_vars:
            raise MilSyntaxError(f"variable {v!r} declared twice",
                                 kw.line, kw.col)
        seen_vars.add(v)

    blocks: list[Block] = []
    labels: set[str] = set()
    while p.peek().kind != "eof":
        lbl = p.ident("block label")
        p.expect(":")
        if lbl.text in labels:
            raise DuplicateLabel(f"label {lbl.text!r} defined twice",
                                 lbl.line, lbl.col)
        labels.add(lbl.text)
        block = Block(lbl.text, lbl.line)
        blocks.append(block)
        while True:
            tok = p.peek()
            if tok.kind == "eof":
                break
            if tok.kind == "ident" and p.toks[p.i + 1].text == ":":
                break
            instr = _parse_instr(p, seen_vars)
            if block.instrs and block.instrs[-1].is_terminator:
                raise MilSyntaxError("instruction after block terminator",
                                     instr.line, 0)
            block.instrs.append(instr)
        if not block.instrs or not block.instrs[-1].is_terminator:
            raise MilSyntaxError(
                f"block {block.label!r} must end in branch/goto/exit",
                block.line, 0)

    if not blocks:
        raise MilSyntaxError("program has no blocks", kw.line, kw.col)
    index = {b.label: None for b in blocks}
    for b in blocks:
        for ins in b.instrs:
            for tgt in (ins.target, ins.target2):
                if tgt is not None and tgt not in index:
                    raise UnknownLabel(f"unknown label {tgt!r}", ins.line)
    return Program(variables, blocks)


def _var(p: _Parser, variables: set[str]) -> str:
    t = p.ident("variable")
    if t.text not in variables:
        raise UnknownVariable(f"unknown variable {t.text!r}", t.line, t.col)
    return t.text


def _mem_operand(p: _Parser, variables: set[str]) -> tuple[str, int, str]:
    """``[ x + of : ty ]``"""
    p.expect("[")
    x = _var(p, variables)
    p.expect("+")
    of = p.number()
    p.expect(":")
    ty = _check_ty(p.ident("field type"))
    p.expect("]")
    return x, of, ty


def _parse_instr(p: _Parser, variables: set[str]) -> Instr:
    t = p.peek()
    line = t.line

    if t.text == "free":
        p.next()
        p.expect("(")
        x = _var(p, variables)
        p.expect(")")
        p.expect(";")
        return Instr("free", line, x=x)
    if t.text == "memset":
        p.next()
        p.expect("(")
        x = _var(p, variables)
        p.expect("+")
        of = p.number()
        p.expect(",")
        zero = p.number()
        if zero != 0:
            raise MilSyntaxError("memset supports value 0 only", line, t.col)
        p.expect(",")
        n = p.number()
        p.expect(")")
        p.expect(";")
        return Instr("memset", line, x=x, of=of, n=n)
    if t.text == "memcpy":
        p.next()
        p.expect("(")
        x = _var(p, variables)
        p.expect("+")
        of = p.number()
        p.expect(",")
        y = _var(p, variables)
        p.expect("+")
        of2 = p.number()
        p.expect(",")
        n = p.number()
        p.expect(")")
        p.expect(";")
        return Instr("memcpy", line, x=x, of=of, y=y, of2=of2, n=n)
    if t.text == "branch":
        p.next()
        a = _var(p, variables)
        opt = p.next()
        if opt.text not in COND_OPS:
            raise MilSyntaxError(f"unknown comparison {opt.text!r}",
                                 opt.line, opt.col)
        b = _var(p, variables)
        p.expect(",")
        lt = p.ident("label").text
        p.expect(",")
        lf = p.ident("label").text
        p.expect(";")
        return Instr("branch", line, x=a, y=b, cond=opt.text,
                     target=lt, target2=lf)
    if t.text == "goto":
        p.next()
        lbl = p.ident("label").text
        p.expect(";")
        return Instr("goto", line, target=lbl)
    if t.text == "exit":
        p.next()
        p.expect(";")
        return Instr("exit", line)
    if t.text == "store":
        p.next()
        x, of, ty = _mem_operand(p, variables)
        p.expect("=")
        y = _var(p, variables)
        p.expect(";")
        return Instr("store", line, x=x, of=of, ty=ty, y=y)

    # assignments: x = ...
    x = _var(p, variables)
    p.expect("=")
    rhs = p.peek()
    if rhs.text in ("malloc", "calloc"):
        p.next()
        p.expect("(")
        n = p.number()
        if n < 1:
            raise MilSyntaxError("allocation size must be positive",
                                 rhs.line, rhs.col)
        p.expect(")")
        p.expect(";")
        return Instr(rhs.text, line, x=x, n=n)
    if rhs.text == "nondet":
        p.next()
        p.expect("(")
        p.expect(")")
        p.expect(";")
        return Instr("nondet", line, x=x)
    if rhs.text == "null":
        p.next()
        p.expect(";")
        return Instr("setnull", line, x=x)
    if rhs.text == "load":
        p.next()
        y, of, ty = _mem_operand(p, variables)
        p.expect(";")
        return Instr("load", line, x=x, y=y, of=of, ty=ty)
    y = _var(p, variables)
    if p.peek().text == "+":
        p.next()
        k = p.number()
        p.expect(";")
        return Instr("add", line, x=x, y=y, k=k)
    p.expect(";")
    return Instr("copy", line, x=x, y=y)


# ---------------------------------------------------------------------------
# printing (canonical form; parse . print == identity)
# ---------------------------------------------------------------------------


def print_instr(ins: Instr) -> str:
    op = ins.op
    if op == "malloc" or op == "calloc":
        return f"{ins.x} = {op}({ins.n});"
    if op == "free":
        return f"free({ins.x});"
    if op == "setnull":
        return f"{ins.x} = null;"
    if op == "copy":
        return f"{ins.x} = {ins.y};"
    if op == "add":
        return f"{ins.x} = {ins.y} + {ins.k};"
    if op == "load":
        return f"{ins.x} = load [{ins.y} + {ins.of} : {ins.ty}];"
    if op == "store":
        return f"store [{ins.x} + {ins.of} : {ins.ty}] = {ins.y};"
    if op == "nondet":
        return f"{ins.x} = nondet();"
    if op == "memset":
        return f"memset({ins.x} + {ins.of}, 0, {ins.n});"
    if op == "memcpy":
        return f"memcpy({ins.x} + {ins.of}, {ins.y} + {ins.of2}, {ins.n});"
    if op == "branch":
        return (f"branch {ins.x} {ins.cond} {ins.y}, "
                f"{ins.target}, {ins.target2};")
    if op == "goto":
        return f"goto {ins.target};"
    if op == "exit":
        return "exit;"
    raise ValueError(op)


def print_program(p: Program) -> str:
    lines = ["vars " + ", ".join(p.variables) + ";", ""]
    for b in p.blocks:
        lines.append(f"{b.label}:")
        for ins in b.instrs:
            lines.append("  " + print_instr(ins))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# control flow graph
# ---------------------------------------------------------------------------


def build_cfg(p: Program) -> CFG:
    """Successor/predecessor lists plus loop heads (targets of back edges
    under a depth-first walk that takes successors in block order)."""
    index = p.block_index
    succs: list[list[int]] = []
    for b in p.blocks:
        last = b.instrs[-1]
        if last.op == "goto":
            succs.append([index[last.target]])
        elif last.op == "branch":
            succs.append([index[last.target], index[last.target2]])
        else:
            succs.append([])
    preds: list[list[int]] = [[] for _ in p.blocks]
    for i, ss in enumerate(succs):
        for s in ss:
            if i not in preds[s]:
                preds[s].append(i)

    loop_heads: set[int] = set()
    state = [0] * len(p.blocks)  # 0 unvisited, 1 on stack, 2 done

    def dfs(i: int) -> None:
        state[i] = 1
        for s in succs[i]:
            if state[s] == 0:
                dfs(s)
            elif state[s] == 1:
                loop_heads.add(s)
        state[i] = 2

    dfs(0)
    return CFG(p, succs, preds, loop_heads)
