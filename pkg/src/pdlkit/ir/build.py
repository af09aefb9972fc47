"""Lowering of typed instruction behavior into a BehaviorGraph."""
from __future__ import annotations

from ..frontend import model as M
from .graph import BehaviorGraph


class _Lower:
    def __init__(self, g: BehaviorGraph, instr_bytes: int):
        self.g = g
        self.memo: dict[int, int] = {}

    def expr(self, e: M.TExpr) -> int:
        k = id(e)
        if k in self.memo:
            return self.memo[k]
        r = self._expr(e)
        self.memo[k] = r
        return r

    def _expr(self, e):
        g = self.g
        if isinstance(e, M.TVar):
            return self.expr(e.value)
        if isinstance(e, M.TConst):
            if e.ty is None:
                raise TypeError("untyped constant reached the graph builder")
            return g.const(e.value, e.ty.width)
        if isinstance(e, M.TField):
            return g.node("field", (), (e.name,), e.ty.width)
        if isinstance(e, M.TPc):
            pc = g.node("pc", (), (), e.ty.width)
            if e.offset:
                return g.node("add", (pc, g.const(e.offset, e.ty.width)), (), e.ty.width)
            return pc
        if isinstance(e, M.TReadReg):
            args = (self.expr(e.index),) if e.index is not None else ()
            return g.node("readreg", args, (e.res,), e.ty.width)
        if isinstance(e, M.TReadMem):
            return g.node("readmem", (self.expr(e.addr),), (e.res, e.n), e.ty.width)
        if isinstance(e, M.TOp):
            return g.node(e.op, [self.expr(a) for a in e.args], (), e.ty.width)
        if isinstance(e, M.TCast):
            a = self.expr(e.a)
            if e.kind == "retype" or e.ty.width == e.a.ty.width:
                return a
            return g.node(e.kind, (a,), (), e.ty.width)
        if isinstance(e, M.TSlice):
            return g.node("slice", (self.expr(e.a),), (e.hi, e.lo), e.ty.width)
        if isinstance(e, M.TConcat):
            return g.node("concat", [self.expr(p) for p in e.parts], (), e.ty.width)
        if isinstance(e, M.TSelect):
            return g.node("select", (self.expr(e.c), self.expr(e.a), self.expr(e.b)), (), e.ty.width)
        raise TypeError(f"cannot lower {e!r}")

    # statements produce a list of pending effects: [key, guard, payload]
    def stmts(self, stmts, guard) -> list:
        out = []
        for s in stmts:
            if isinstance(s, M.SLet):
                self.expr(s.value)
            elif isinstance(s, M.SWrite):
                out.append(self.write(s, guard))
            elif isinstance(s, M.SIf):
                c = self.expr(s.cond)
                nc = self.g.node("not", (c,), (), 1)
                gt = c if guard is None else self.g.node("and", (guard, c), (), 1)
                ge = nc if guard is None else self.g.node("and", (guard, nc), (), 1)
                th = self.stmts(s.then, gt)
                el = self.stmts(s.other, ge)
                out.extend(self.merge(c, guard, gt, ge, th, el))
        return out

    def write(self, s: M.SWrite, guard):
        v = self.expr(s.value)
        if s.kind == "reg":
            idx = self.expr(s.index) if s.index is not None else None
            return [("reg", s.res, idx), guard, (idx, v)]
        if s.kind == "mem":
            a = self.expr(s.index)
            return [("mem", s.res, a, s.n), guard, (a, v)]
        return [("pc", s.res), guard, (None, v)]

    def merge(self, c, parent, gt, ge, th, el):
        """Two writes to the same location from the branches of one `if`
        become one write of a select under the parent guard."""
        out = []
        used = set()
        for t in th:
            match = None
            if t[1] == gt:
                for j, e in enumerate(el):
                    if j not in used and e[0] == t[0] and e[1] == ge:
                        match = j
                        break
            if match is None:
                out.append(t)
                continue
            used.add(match)
            e = el[match]
            idx, vt = t[2]
            _, ve = e[2]
            width = self.g[vt].width
            sel = self.g.node("select", (c, vt, ve), (), width)
            out.append([t[0], parent, (idx, sel)])
        out.extend(e for j, e in enumerate(el) if j not in used)
        return out


def emit_effects(g: BehaviorGraph, pending):
    for key, guard, (idx, v) in pending:
        gargs = (guard,) if guard is not None else ()
        has_g = guard is not None
        if key[0] == "reg":
            if idx is None:
                g.effect("writereg", (v,) + gargs, (key[1], False, has_g))
            else:
                g.effect("writereg", (idx, v) + gargs, (key[1], True, has_g))
        elif key[0] == "mem":
            g.effect("writemem", (idx, v) + gargs, (key[1], key[3], has_g))
        else:
            g.effect("writepc", (v,) + gargs, (key[1], has_g))


def build_behavior(instr: M.Instruction, instr_bytes: int = 4) -> BehaviorGraph:
    """Raw (unfolded) behavior graph of an elaborated instruction."""
    g = BehaviorGraph(instr.name)
    lw = _Lower(g, instr_bytes)
    pending = lw.stmts(instr.body, None)
    emit_effects(g, pending)
    return g.finish()
