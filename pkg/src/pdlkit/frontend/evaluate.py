"""Direct evaluation of typed expressions (constant folding, operand
predicates and encodings, access functions)."""
from __future__ import annotations

from ..bits import apply_op, sext, trunc
from . import model as M


class EvalEnv:
    def __init__(self, fields=None, params=None, pc=0, read_reg=None, read_mem=None):
        self.fields = fields or {}
        self.params = params or {}
        self.pc = pc
        self.read_reg = read_reg
        self.read_mem = read_mem


class NotConstant(Exception):
    pass


def evaluate(e: M.TExpr, env: EvalEnv, memo: dict | None = None) -> int:
    """Value of e as an unsigned pattern of e.ty.width bits (untyped: plain int)."""
    if memo is None:
        memo = {}
    key = id(e)
    if key in memo:
        return memo[key]
    v = _eval(e, env, memo)
    memo[key] = v
    return v


def _eval(e, env, memo):
    ev = lambda x: evaluate(x, env, memo)  # noqa: E731
    if isinstance(e, M.TConst):
        return e.value if e.ty is None else trunc(e.value, e.ty.width)
    if isinstance(e, M.TVar):
        return ev(e.value)
    if isinstance(e, M.TField):
        if e.name not in env.fields:
            raise NotConstant(e.name)
        return trunc(env.fields[e.name], e.ty.width)
    if isinstance(e, M.TParam):
        if e.name not in env.params:
            raise NotConstant(e.name)
        return trunc(env.params[e.name], e.ty.width)
    if isinstance(e, M.TPc):
        return trunc(env.pc + e.offset, e.ty.width)
    if isinstance(e, M.TReadReg):
        if env.read_reg is None:
            raise NotConstant(e.res)
        idx = ev(e.index) if e.index is not None else None
        return trunc(env.read_reg(e.res, idx), e.ty.width)
    if isinstance(e, M.TReadMem):
        if env.read_mem is None:
            raise NotConstant(e.res)
        return trunc(env.read_mem(e.res, e.n, ev(e.addr)), e.ty.width)
    if isinstance(e, M.TOp):
        w = e.args[0].ty.width
        if e.op == "not":
            return trunc(~ev(e.args[0]), w)
        if e.op == "neg":
            return trunc(-ev(e.args[0]), w)
        return apply_op(e.op, ev(e.args[0]), ev(e.args[1]), w)
    if isinstance(e, M.TCast):
        v = ev(e.a)
        w = e.ty.width
        if e.kind == "sext":
            return trunc(sext(v, e.a.ty.width), w)
        return trunc(v, w)
    if isinstance(e, M.TSlice):
        return (ev(e.a) >> e.lo) & ((1 << (e.hi - e.lo + 1)) - 1)
    if isinstance(e, M.TConcat):
        v = 0
        for p in e.parts:
            v = (v << p.ty.width) | ev(p)
        return v
    if isinstance(e, M.TSelect):
        return ev(e.a) if ev(e.c) else ev(e.b)
    raise TypeError(f"cannot evaluate {e!r}")


def signed_value(e: M.TExpr, v: int) -> int:
    return sext(v, e.ty.width) if e.ty is not None and e.ty.signed else v
