"""Instruction-selection tree patterns extracted from behavior graphs.

A pattern exists when an instruction has exactly one side effect and the
expressions feeding it form a tree once register reads, format fields and
access functions are treated as operand leaves.  Access functions are
recognized structurally, so an immediate shows up as ``imm:$immS`` rather
than as the sign extension it stands for.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ir import canonicalize
from .ir.build import _Lower
from .ir.graph import BehaviorGraph
from .ir.interp import eval_op


@dataclass(frozen=True)
class PLeaf:
    kind: str  # reg | imm | const | pc
    name: str  # register file for reg, operand name for reg/imm
    width: int
    value: int = 0
    file: str = ""

    def render(self):
        if self.kind == "reg":
            return f"{self.file}:${self.name}"
        if self.kind == "imm":
            return f"imm:${self.name}"
        if self.kind == "const":
            return f"imm {self.value}"
        return "pc"


@dataclass(frozen=True)
class POp:
    op: str
    attrs: tuple
    width: int
    args: tuple
    arg_widths: tuple

    def render(self):
        inner = ", ".join(a.render() for a in self.args)
        if self.op in ("sext", "zext", "trunc"):
            return f"{self.op}<{self.width}>({inner})"
        if self.op == "slice":
            return f"slice<{self.attrs[0]},{self.attrs[1]}>({inner})"
        if self.op == "load":
            return f"load<{self.attrs[0]}>({inner})"
        return f"{self.op}({inner})"


@dataclass(frozen=True)
class SelPattern:
    instr: str
    kind: str  # set | store | br | brcond
    dst: PLeaf | None
    tree: object
    extra: object = None  # store address / branch target

    def render(self):
        if self.kind == "set":
            return f"set({self.dst.render()}, {self.tree.render()})"
        if self.kind == "store":
            return f"{self.dst}({self.tree.render()}, {self.extra.render()})"
        if self.kind == "brcond":
            return f"brcond({self.tree.render()}, {self.extra.render()})"
        return f"br({self.tree.render()})"

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class NotATree:
    instr: str
    reason: str

    def render(self):
        return f"NOT-A-TREE {self.reason}"

    def __bool__(self):
        return False

    def __str__(self):
        return self.render()


def _sig(g, nid):
    n = g[nid]
    return (n.op, n.attrs, n.width, tuple(_sig(g, a) for a in n.args))


def _accessor_sigs(fmt) -> dict:
    """Structural signature of each access function as it appears after
    canonicalization -> accessor name."""
    out = {}
    for name, acc in fmt.accessors.items():
        g = BehaviorGraph(name)
        v = _Lower(g, 0).expr(acc.expr)
        g.effect("writepc", (v,), ("PC", False))
        c = canonicalize(g.finish())
        sig = _sig(c, c[c.effects[0]].value)
        if sig[0] != "field":  # plain fields already render as their own name
            out.setdefault(sig, name)
    return out


class _Builder:
    def __init__(self, g, instr):
        self.g = g
        self.instr = instr
        self.accs = _accessor_sigs(instr.format)
        self.used: set = set()

    def leaf_reg(self, n):
        idx = self.g[n.args[0]] if n.args else None
        if idx is not None and idx.op != "field":
            return None
        return PLeaf("reg", idx.attrs[0] if idx is not None else n.res, n.width, file=n.res)

    def tree(self, nid):
        g = self.g
        n = g[nid]
        acc = self.accs.get(_sig(g, nid))
        if acc is not None:
            return PLeaf("imm", acc, n.width)
        if n.op == "field":
            return PLeaf("imm", n.attrs[0], n.width)
        if n.op == "const":
            return PLeaf("const", "", n.width, n.attrs[0])
        if n.op == "pc":
            return PLeaf("pc", "", n.width)
        if n.op == "readreg":
            leaf = self.leaf_reg(n)
            if leaf is None:
                raise _NotTree("register index is not an operand")
            return leaf
        if nid in self.used:
            raise _NotTree(f"shared subexpression {n.label()}")
        self.used.add(nid)
        if n.op == "readmem":
            return POp("load", (n.attrs[1],), n.width, (self.tree(n.args[0]),), (g[n.args[0]].width,))
        return POp(n.op, n.attrs, n.width, tuple(self.tree(a) for a in n.args),
                   tuple(g[a].width for a in n.args))


class _NotTree(Exception):
    pass


def extract_pattern(g: BehaviorGraph, instr) -> SelPattern | NotATree:
    name = instr.name
    effs = [g[e] for e in g.effects]
    if not effs:
        return NotATree(name, "no side effects")
    if len(effs) > 1:
        return NotATree(name, "multiple side effects: " + ", ".join(e.label() for e in effs))
    e = effs[0]
    b = _Builder(g, instr)
    try:
        if e.op == "writepc":
            target = b.tree(e.value)
            if e.has_guard:
                return SelPattern(name, "brcond", None, b.tree(e.guard), target)
            return SelPattern(name, "br", None, target)
        if e.has_guard:
            return NotATree(name, f"conditional {e.label()}")
        if e.op == "writereg":
            if e.attrs[1]:
                idx = g[e.args[0]]
                if idx.op != "field":
                    return NotATree(name, "destination index is not an operand")
                dst = PLeaf("reg", idx.attrs[0], 0, file=e.res)
            else:
                dst = PLeaf("reg", e.res, 0, file=e.res)
            return SelPattern(name, "set", dst, b.tree(e.value))
        value = b.tree(e.value)
        addr = b.tree(e.args[0])
        return SelPattern(name, "store", f"store<{e.attrs[1]}>", value, addr)
    except _NotTree as ex:
        return NotATree(name, str(ex))


def extract_all(spec, graphs=None) -> dict:
    from .ir import build_all
    graphs = graphs if graphs is not None else build_all(spec)
    return {n: extract_pattern(graphs[n], spec.instructions[n]) for n in graphs}


def emit_patterns(spec, graphs=None) -> str:
    """One `NAME: <pattern>` line per instruction, in source order."""
    pats = extract_all(spec, graphs)
    return "".join(f"{n}: {p.render()}\n" for n, p in pats.items())


def eval_pattern(tree, bind) -> int:
    """Evaluate a pattern tree; bind(leaf) supplies register and immediate values."""
    if isinstance(tree, PLeaf):
        if tree.kind == "const":
            return tree.value
        return bind(tree) & ((1 << tree.width) - 1)
    args = [eval_pattern(a, bind) for a in tree.args]
    if tree.op == "load":
        raise ValueError("loads need memory bindings")
    return eval_op(tree.op, tree.attrs, tree.width, args, list(tree.arg_widths))
