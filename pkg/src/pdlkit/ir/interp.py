"""Reference evaluation of behavior-graph nodes on Python integers."""
from __future__ import annotations

from ..bits import apply_op, sext
from .graph import BINARY_OPS, BehaviorGraph


def eval_op(op, attrs, width, args, arg_widths):
    """Value of one pure, non-leaf node given its operand values."""
    m = (1 << width) - 1
    if op == "const":
        return attrs[0]
    if op == "not":
        return ~args[0] & m
    if op == "neg":
        return -args[0] & m
    if op in BINARY_OPS:
        return apply_op(op, args[0], args[1], arg_widths[0]) & m
    if op == "sext":
        return sext(args[0], arg_widths[0]) & m
    if op in ("zext", "trunc"):
        return args[0] & m
    if op == "slice":
        return (args[0] >> attrs[1]) & m
    if op == "concat":
        v = 0
        for x, w in zip(args, arg_widths):
            v = (v << w) | x
        return v
    if op == "select":
        return args[1] if args[0] else args[2]
    raise ValueError(f"not a computational node: {op}")


class Effect(tuple):
    """(kind, resource, index, value, units); index is None for PC and plain registers."""
    __slots__ = ()

    def __new__(cls, kind, res, index, value, n=1):
        return super().__new__(cls, (kind, res, index, value, n))

    kind = property(lambda s: s[0])
    res = property(lambda s: s[1])
    index = property(lambda s: s[2])
    value = property(lambda s: s[3])
    n = property(lambda s: s[4])


def evaluate_graph(g: BehaviorGraph, fields: dict, pc: int, read_reg, read_mem, vals=None):
    """Evaluate every node; returns (values list, fired effects).

    read_reg(res, index) and read_mem(res, n, addr) supply the architectural
    state.  All reads see the state before any effect is applied.
    """
    nodes = g.nodes
    if vals is None:
        vals = [0] * len(nodes)
    fired = []
    for n in nodes:
        op = n.op
        if op == "field":
            vals[n.id] = fields[n.attrs[0]] & ((1 << n.width) - 1)
        elif op == "pc":
            vals[n.id] = pc & ((1 << n.width) - 1)
        elif op == "readreg":
            idx = vals[n.args[0]] if n.args else None
            vals[n.id] = read_reg(n.attrs[0], idx)
        elif op == "readmem":
            vals[n.id] = read_mem(n.attrs[0], n.attrs[1], vals[n.args[0]])
        elif op in ("start", "end"):
            continue
        elif n.is_effect:
            if n.has_guard and not vals[n.guard]:
                continue
            if op == "writereg":
                idx = vals[n.args[0]] if n.attrs[1] else None
                fired.append(Effect("reg", n.attrs[0], idx, vals[n.value]))
            elif op == "writemem":
                fired.append(Effect("mem", n.attrs[0], vals[n.args[0]], vals[n.value], n.attrs[1]))
            else:
                fired.append(Effect("pc", n.attrs[0], None, vals[n.value]))
        else:
            vals[n.id] = eval_op(op, n.attrs, n.width, [vals[a] for a in n.args],
                                 [nodes[a].width for a in n.args])
    return vals, fired
