"""Flatten a canonical behavior graph into a linear tape for the kernels.

A tape row is eight int64 slots:

    (opcode, dst, a, b, c, width, aux, aw)

``a``/``b``/``c`` are value-slot indices (or -1), ``aux`` is an
opcode-specific immediate (slice low bit, register-file row, access size)
and ``aw`` is the width of operand ``a``.  Constants never appear as rows;
their slots are pre-filled in ``Tape.init``.  Graphs with any value wider
than 64 bits are rejected so the compiled kernel can work on uint64.
"""
from __future__ import annotations

import numpy as np

from .ir.graph import BehaviorGraph

OPNAMES = (
    "field", "pc", "readreg", "readmem",
    "not", "neg", "add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr",
    "eq", "ne", "ult", "ule", "slt", "sle", "udiv", "urem", "sdiv", "srem", "umull", "smull",
    "sext", "zext", "trunc", "slice", "concat2", "select",
    "writereg", "writemem", "writepc",
)
OPCODE = {n: i for i, n in enumerate(OPNAMES)}

# effect kinds returned by the kernels
K_REG, K_MEM, K_PC = 0, 1, 2

MAX_WIDTH = 64


class Tape:
    __slots__ = ("name", "array", "rows", "init", "init_list", "nslots", "field_names")

    def __init__(self, name, rows, init, field_names):
        self.name = name
        self.rows = [tuple(r) for r in rows]
        self.array = np.array(rows, dtype=np.int64).reshape(-1, 8)
        self.init = np.array(init, dtype=np.uint64)
        self.init_list = list(init)
        self.nslots = len(init)
        self.field_names = field_names

    def field_vector(self, fields: dict):
        return np.array([fields[f] for f in self.field_names], dtype=np.uint64)

    def __len__(self):
        return len(self.rows)


def compile_tape(g: BehaviorGraph, reg_rows: dict) -> Tape | None:
    """Tape for g, or None when some value does not fit 64 bits.

    reg_rows maps each register file and single register name to its row in
    the machine's register matrix.
    """
    nodes = g.nodes
    if any(n.width > MAX_WIDTH for n in nodes):
        return None
    init = [0] * len(nodes)
    rows = []
    field_names: list[str] = []
    for n in nodes:
        op = n.op
        if op in ("start", "end"):
            continue
        if op == "const":
            init[n.id] = n.attrs[0]
            continue
        a = n.args
        w = n.width
        if op == "field":
            name = n.attrs[0]
            if name not in field_names:
                field_names.append(name)
            rows.append((OPCODE["field"], n.id, field_names.index(name), -1, -1, w, 0, 0))
        elif op == "pc":
            rows.append((OPCODE["pc"], n.id, -1, -1, -1, w, 0, 0))
        elif op == "readreg":
            rows.append((OPCODE["readreg"], n.id, a[0] if a else -1, -1, -1, w,
                         reg_rows[n.attrs[0]], 0))
        elif op == "readmem":
            rows.append((OPCODE["readmem"], n.id, a[0], -1, -1, w, n.attrs[1], 0))
        elif op == "writereg":
            idx = a[0] if n.attrs[1] else -1
            guard = n.guard if n.has_guard else -1
            rows.append((OPCODE["writereg"], -1, idx, n.value, guard, 0, reg_rows[n.attrs[0]], 0))
        elif op == "writemem":
            guard = n.guard if n.has_guard else -1
            rows.append((OPCODE["writemem"], -1, a[0], a[1], guard, 0, n.attrs[1], 0))
        elif op == "writepc":
            guard = n.guard if n.has_guard else -1
            rows.append((OPCODE["writepc"], -1, -1, a[0], guard, 0, 0, 0))
        elif op == "slice":
            rows.append((OPCODE["slice"], n.id, a[0], -1, -1, w, n.attrs[1], 0))
        elif op == "concat":
            # left fold through scratch slots: acc = (acc << w(p)) | p
            acc, accw = a[0], nodes[a[0]].width
            for k, p in enumerate(a[1:]):
                pw = nodes[p].width
                last = k == len(a) - 2
                dst = n.id if last else len(init)
                if not last:
                    init.append(0)
                rows.append((OPCODE["concat2"], dst, acc, p, -1, accw + pw, pw, accw))
                acc, accw = dst, accw + pw
        elif op == "select":
            rows.append((OPCODE["select"], n.id, a[0], a[1], a[2], w, 0, 0))
        elif op in OPCODE:
            b = a[1] if len(a) > 1 else -1
            rows.append((OPCODE[op], n.id, a[0], b, -1, w, 0, nodes[a[0]].width))
        else:
            raise ValueError(f"cannot compile node {n!r}")
    return Tape(g.name, rows, init, field_names)
