"""SSA behavior graph: a hash-consed dependency graph plus a Start/End
control chain.  Node ids are assigned in creation order, so every node's
operands have smaller ids and id order is a topological order."""
from __future__ import annotations

from ..bits import COMMUTATIVE

PURE_LEAVES = frozenset({"const", "field", "pc"})
READS = frozenset({"readreg", "readmem"})
EFFECTS = frozenset({"writereg", "writemem", "writepc"})
CONTROL = frozenset({"start", "end", "ifsplit", "merge"})
UNARY_OPS = frozenset({"not", "neg"})
BINARY_OPS = frozenset({
    "add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr", "eq", "ne", "ult", "ule",
    "slt", "sle", "udiv", "urem", "sdiv", "srem", "umull", "smull",
})
CASTS = frozenset({"sext", "zext", "trunc"})


class Node:
    __slots__ = ("id", "op", "args", "attrs", "width")

    def __init__(self, id, op, args, attrs, width):
        self.id, self.op, self.args, self.attrs, self.width = id, op, args, attrs, width

    def key(self):
        return (self.op, self.args, self.attrs, self.width)

    @property
    def is_effect(self):
        return self.op in EFFECTS

    @property
    def is_pure(self):
        return self.op not in EFFECTS and self.op not in CONTROL

    # side-effect accessors --------------------------------------------------
    @property
    def res(self):
        return self.attrs[0]

    @property
    def has_guard(self):
        return self.op in EFFECTS and self.attrs[-1]

    @property
    def guard(self):
        return self.args[-1] if self.has_guard else None

    @property
    def value(self):
        if self.op == "writepc" or (self.op == "writereg" and not self.attrs[1]):
            return self.args[0]
        return self.args[1]

    @property
    def index(self):
        """Register index / memory address operand (None for plain registers)."""
        if self.op == "writereg":
            return self.args[0] if self.attrs[1] else None
        if self.op == "writemem":
            return self.args[0]
        if self.op == "readreg":
            return self.args[0] if self.args else None
        if self.op == "readmem":
            return self.args[0]
        return None

    def label(self) -> str:
        op, a = self.op, self.attrs
        if op == "const":
            return f"const {a[0]:#x}:{self.width}"
        if op == "field":
            return f"field {a[0]}"
        if op == "pc":
            return "read<PC>"
        if op == "readreg":
            return f"read<{a[0]}>"
        if op == "readmem":
            return f"read<{a[0]}:{a[1]}>"
        if op == "writereg":
            return f"write<{a[0]}>"
        if op == "writemem":
            return f"write<{a[0]}:{a[1]}>"
        if op == "writepc":
            return "write<PC>"
        if op == "slice":
            return f"slice {a[0]}..{a[1]}"
        if op in CASTS:
            return f"{op}<{self.width}>"
        return op

    def __repr__(self):
        return f"%{self.id}={self.label()}({', '.join('%' + str(x) for x in self.args)})"


class BehaviorGraph:
    """Behavior graph of one instruction."""

    def __init__(self, name: str = ""):
        self.name = name
        self.nodes: list[Node] = []
        self._table: dict = {}
        self.start = self._add("start", (), (), 0)
        self.end: int | None = None
        self.effects: list[int] = []
        self.fold = False  # set by the canonicalizer's rebuilding pass

    # construction -------------------------------------------------------------
    def _add(self, op, args, attrs, width) -> int:
        n = Node(len(self.nodes), op, tuple(args), tuple(attrs), width)
        self.nodes.append(n)
        return n.id

    def node(self, op, args=(), attrs=(), width=0) -> int:
        """Hash-consed creation of a pure node."""
        args = tuple(args)
        if op in COMMUTATIVE and len(args) == 2 and args[0] > args[1]:
            args = (args[1], args[0])
        key = (op, args, tuple(attrs), width)
        hit = self._table.get(key)
        if hit is not None:
            return hit
        nid = self._add(op, args, attrs, width)
        self._table[key] = nid
        return nid

    def const(self, value, width):
        return self.node("const", (), (value & ((1 << width) - 1),), width)

    def effect(self, op, args, attrs) -> int:
        nid = self._add(op, args, attrs, 0)
        self.effects.append(nid)
        return nid

    def finish(self):
        self.end = self._add("end", tuple(self.effects), (), 0)
        return self

    # queries --------------------------------------------------------------------
    def __getitem__(self, i) -> Node:
        return self.nodes[i]

    def __len__(self):
        return len(self.nodes)

    def by_op(self, op):
        return [n for n in self.nodes if n.op == op]

    def pure_nodes(self):
        return [n for n in self.nodes if n.is_pure]

    def users(self) -> dict:
        out = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for a in n.args:
                out[a].append(n.id)
        return out

    def edges(self):
        """(src, dst, kind) with kind 'data' or 'control'."""
        out = []
        for n in self.nodes:
            for a in n.args:
                out.append((a, n.id, "data"))
        out.append((self.start, self.end, "control"))
        return out

    def cone(self, roots) -> list[int]:
        """Ids of all nodes reachable backwards from roots, ascending."""
        seen = set()
        stack = list(roots)
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(self.nodes[x].args)
        return sorted(seen)

    def __repr__(self):
        return f"BehaviorGraph({self.name}, {len(self.nodes)} nodes)"
