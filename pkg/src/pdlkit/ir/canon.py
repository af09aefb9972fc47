"""Canonicalization: constant folding, algebraic identities, structural
merging with commutative normalization, and dead-node removal."""
from __future__ import annotations

from .graph import CONTROL, EFFECTS, BehaviorGraph
from .interp import eval_op

_LEAVES = {"field", "pc", "readreg", "readmem"}


def _is_const(g, i):
    return g[i].op == "const"


def _cval(g, i):
    return g[i].attrs[0]


def simplify(g: BehaviorGraph, op, args, attrs, width) -> int:
    """Create (op, args) in g, folding where the result is known."""
    m = (1 << width) - 1
    if op not in _LEAVES and op != "const" and args and all(_is_const(g, a) for a in args):
        v = eval_op(op, attrs, width, [_cval(g, a) for a in args], [g[a].width for a in args])
        return g.const(v, width)
    if op == "select":
        c, a, b = args
        if _is_const(g, c):
            return a if _cval(g, c) else b
        if a == b:
            return a
        if width == 1 and _is_const(g, a) and _is_const(g, b):
            if _cval(g, a) == 1 and _cval(g, b) == 0:
                return c
    if len(args) == 2 and op in ("and", "or", "xor", "add", "sub", "shl", "lshr", "ashr"):
        a, b = args
        ca = _cval(g, a) if _is_const(g, a) else None
        cb = _cval(g, b) if _is_const(g, b) else None
        if op == "and":
            if a == b:
                return a
            for x, cx in ((a, cb), (b, ca)):
                if cx == m and g[x].width == width:
                    return x
            if 0 in (ca, cb):
                return g.const(0, width)
        elif op == "or":
            if a == b:
                return a
            for x, cx in ((a, cb), (b, ca)):
                if cx == 0:
                    return x
            if m in (ca, cb):
                return g.const(m, width)
        elif op == "xor":
            if a == b:
                return g.const(0, width)
            for x, cx in ((a, cb), (b, ca)):
                if cx == 0:
                    return x
        elif op == "add":
            for x, cx in ((a, cb), (b, ca)):
                if cx == 0:
                    return x
        elif op == "sub":
            if a == b:
                return g.const(0, width)
            if cb == 0:
                return a
        elif cb == 0:  # shifts by zero
            return a
    if op in ("eq", "ule", "sle") and args[0] == args[1]:
        return g.const(1, 1)
    if op in ("ne", "ult", "slt") and args[0] == args[1]:
        return g.const(0, 1)
    if op == "not" and g[args[0]].op == "not":
        return g[args[0]].args[0]
    if op == "slice":
        src = g[args[0]]
        hi, lo = attrs
        if lo == 0 and hi == src.width - 1:
            return args[0]
        if src.op == "slice":
            return simplify(g, "slice", src.args, (hi + src.attrs[1], lo + src.attrs[1]), width)
    return g.node(op, args, attrs, width)


def canonicalize(g: BehaviorGraph) -> BehaviorGraph:
    """Semantically equivalent graph with no redundant or dead nodes."""
    tmp = BehaviorGraph(g.name)
    idmap = {g.start: tmp.start}
    for n in g.nodes:
        if n.op in CONTROL or n.op in EFFECTS:
            continue
        idmap[n.id] = simplify(tmp, n.op, tuple(idmap[a] for a in n.args), n.attrs, n.width)
    effects = []
    for e in g.effects:
        n = g[e]
        args = [idmap[a] for a in n.args]
        attrs = list(n.attrs)
        if n.has_guard:
            gd = args[-1]
            if _is_const(tmp, gd):
                if not _cval(tmp, gd):
                    continue  # never fires
                args = args[:-1]
                attrs[-1] = False
        effects.append((n.op, tuple(args), tuple(attrs)))
    # compaction: copy only what the effects need, in topological order
    live = tmp.cone([a for _, args, _ in effects for a in args])
    out = BehaviorGraph(g.name)
    remap = {}
    for i in live:
        n = tmp[i]
        if n.op == "start":
            continue
        remap[i] = out.node(n.op, tuple(remap[a] for a in n.args), n.attrs, n.width)
    for op, args, attrs in effects:
        out.effect(op, tuple(remap[a] for a in args), attrs)
    out.fold = True
    return out.finish()
