"""Reference rendering of an instruction's assembly expression.

Operands are computed from raw fields with the AST evaluator, and the
assembly tree is walked directly; the assembler's own formatter and
grammar are not used.
"""
from pdlkit.frontend import model as M

from .ast_interp import Env, ev


def _signed(v, ty):
    if ty is not None and ty.signed and v >> (ty.width - 1):
        return v - (1 << ty.width)
    return v


def operand_values(instr, fields):
    """Field values plus every access function, as the user writes them."""
    env = Env(fields, 0, None, None)
    out = dict(fields)
    for name, acc in instr.format.accessors.items():
        out[name] = _signed(ev(acc.expr, env), acc.ty)
    return out


def _num(base, v):
    if base == "hex":
        return ("-" if v < 0 else "") + "0x" + format(abs(v), "x")
    return str(v)


def render(instr, fields):
    ops = operand_values(instr, fields)
    env = Env(fields, 0, None, None)

    def walk(n):
        if isinstance(n, M.AConcat):
            return "".join(walk(i) for i in n.items)
        if isinstance(n, M.AStr):
            return n.text
        if isinstance(n, M.AMnemonic):
            return instr.name.lower()
        if isinstance(n, M.ARegister):
            return n.prefix + str(fields[n.field])
        if isinstance(n, M.ANumber):
            if n.operand is not None:
                return _num(n.base, ops[n.operand])
            return _num(n.base, _signed(ev(n.expr, env), n.expr.ty))
        if isinstance(n, M.AIf):
            return walk(n.then if ev(n.cond, env) else n.other)
        if isinstance(n, M.AMatch):
            v = ev(n.scrutinee, env)
            for cv, sub in n.cases:
                if cv == v:
                    return walk(sub)
            return walk(n.default)
        raise TypeError(n)

    return walk(instr.assembly)
