"""Tree-walking interpreter over the typed statements of an instruction.

This is deliberately naive: every expression is evaluated recursively
with Python integers and written out operator by operator.  It shares no
code with the graph builder, the canonicalizer, the tape kernel or the
evaluator in pdlkit.frontend.evaluate.
"""
from pdlkit.frontend import model as M

from .linear_decode import LinearDecoder


def _m(w):
    return (1 << w) - 1


def _s(v, w):
    v &= _m(w)
    return v - (1 << w) if v >> (w - 1) else v


def _div(a, b):
    # truncating division on signed Python ints
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


class Env:
    def __init__(self, fields, pc, reg, mem, params=None):
        self.fields = fields
        self.pc = pc
        self.reg = reg  # (res, idx) -> value
        self.mem = mem  # (n, addr) -> value
        self.params = params or {}
        self.reads = []


def ev(e, env):
    w = e.ty.width if e.ty is not None else None
    if isinstance(e, M.TConst):
        return e.value if w is None else e.value & _m(w)
    if isinstance(e, M.TVar):
        return ev(e.value, env)
    if isinstance(e, M.TField):
        return env.fields[e.name] & _m(w)
    if isinstance(e, M.TParam):
        return env.params[e.name] & _m(w)
    if isinstance(e, M.TPc):
        return (env.pc + e.offset) & _m(w)
    if isinstance(e, M.TReadReg):
        idx = ev(e.index, env) if e.index is not None else None
        env.reads.append((e.res, idx))
        return env.reg(e.res, idx) & _m(w)
    if isinstance(e, M.TReadMem):
        return env.mem(e.n, ev(e.addr, env)) & _m(w)
    if isinstance(e, M.TSlice):
        return (ev(e.a, env) >> e.lo) & _m(e.hi - e.lo + 1)
    if isinstance(e, M.TConcat):
        v = 0
        for p in e.parts:
            v = (v << p.ty.width) | ev(p, env)
        return v
    if isinstance(e, M.TSelect):
        return ev(e.a, env) if ev(e.c, env) else ev(e.b, env)
    if isinstance(e, M.TCast):
        v = ev(e.a, env)
        if e.kind == "sext":
            return _s(v, e.a.ty.width) & _m(w)
        return v & _m(w)  # zext, trunc, retype
    if isinstance(e, M.TOp):
        return _op(e, [ev(a, env) for a in e.args])
    raise TypeError(f"oracle cannot evaluate {type(e).__name__}")


def _op(e, args):
    op = e.op
    w = e.args[0].ty.width
    if op == "not":
        return ~args[0] & _m(w)
    if op == "neg":
        return -args[0] & _m(w)
    a, b = args
    sa, sb = _s(a, w), _s(b, w)
    if op == "add":
        return (a + b) & _m(w)
    if op == "sub":
        return (a - b) & _m(w)
    if op == "mul":
        return (a * b) & _m(w)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return (a << b) & _m(w)
    if op == "lshr":
        return a >> b
    if op == "ashr":
        return (sa >> b) & _m(w)
    if op == "eq":
        return int(a == b)
    if op == "ne":
        return int(a != b)
    if op == "ult":
        return int(a < b)
    if op == "ule":
        return int(a <= b)
    if op == "slt":
        return int(sa < sb)
    if op == "sle":
        return int(sa <= sb)
    if op == "umull":
        return a * b
    if op == "smull":
        return (sa * sb) & _m(2 * w)
    if op == "udiv":
        return _m(w) if b == 0 else a // b
    if op == "urem":
        return a if b == 0 else a % b
    if op == "sdiv":
        return _m(w) if sb == 0 else _div(sa, sb) & _m(w)
    if op == "srem":
        return a if sb == 0 else (sa - _div(sa, sb) * sb) & _m(w)
    raise ValueError(op)


def run_body(stmts, env, out):
    for s in stmts:
        if isinstance(s, M.SWrite):
            v = ev(s.value, env)
            if s.kind == "reg":
                idx = ev(s.index, env) if s.index is not None else None
                out.append(("reg", s.res, idx, v, 1))
            elif s.kind == "mem":
                out.append(("mem", s.res, ev(s.index, env), v, s.n))
            else:
                out.append(("pc", s.res, None, v, 1))
        elif isinstance(s, M.SIf):
            run_body(s.then if ev(s.cond, env) else s.other, env, out)
        # SLet only marks where a binding was evaluated


def execute(instr, fields, pc, reg, mem):
    """Effects (kind, res, index, value, units) in statement order."""
    env = Env(fields, pc, reg, mem)
    out = []
    run_body(instr.body, env, out)
    return out


# -- static facts used by the timing oracle -------------------------------------------------
def _walk(e, seen=None):
    seen = set() if seen is None else seen
    if e is None or id(e) in seen:
        return
    seen.add(id(e))
    yield e
    for c in e.children():
        yield from _walk(c, seen)


def _stmts(stmts):
    for s in stmts:
        yield s
        if isinstance(s, M.SIf):
            yield from _stmts(s.then)
            yield from _stmts(s.other)


def static_reg_reads(instr, fields, res):
    """Register indices of `res` read by the instruction, given its fields."""
    out = set()
    roots = []
    for s in _stmts(instr.body):
        if isinstance(s, M.SWrite):
            roots += [s.value, s.index]
        elif isinstance(s, M.SIf):
            roots.append(s.cond)
    env = Env(fields, 0, lambda r, i: 0, lambda n, a: 0)
    for r in roots:
        for e in _walk(r):
            if isinstance(e, M.TReadReg) and e.res == res:
                out.add(ev(e.index, env) if e.index is not None else None)
    return out


def reg_value_needs_memory(instr, res):
    """True when some write to `res` takes its value from a memory read."""
    for s in _stmts(instr.body):
        if isinstance(s, M.SWrite) and s.kind == "reg" and s.res == res:
            if any(isinstance(e, M.TReadMem) for e in _walk(s.value)):
                return True
    return False


# -- whole-program reference machine -----------------------------------------------
class RefMachine:
    """Architectural state plus fetch/decode/execute, all from the SpecModel."""

    def __init__(self, spec):
        self.spec = spec
        self.dec = LinearDecoder(spec)
        self.regs = {}
        self.zero = {(n, i) for n, rf in spec.regfiles.items() for i in rf.zero}
        self.mem = {}
        self.unit = spec.memory.unit_width if spec.memory else 8
        self.aw = spec.memory.addr_width if spec.memory else 32
        self.big = bool(spec.memory) and spec.memory.endian == "big"
        self.pcw = spec.pc.width
        self.iw = spec.instr_width
        self.pc = 0

    def reg(self, res, idx):
        return self.regs.get((res, idx), 0)

    def load(self, n, addr):
        units = [self.mem.get((addr + i) & _m(self.aw), 0) for i in range(n)]
        if not self.big:
            units = units[::-1]
        v = 0
        for u in units:
            v = (v << self.unit) | u
        return v

    def store(self, n, addr, v):
        for i in range(n):
            k = n - 1 - i if self.big else i
            self.mem[(addr + i) & _m(self.aw)] = (v >> (k * self.unit)) & _m(self.unit)

    def load_image(self, image, base):
        for i, u in enumerate(image):
            self.mem[base + i] = u

    def step(self):
        """One instruction; returns a dict describing what happened."""
        nunits = self.iw // self.unit
        pc = self.pc
        word = self.load(nunits, pc)
        d = self.dec.decode(word)
        if d is None:
            raise ValueError(f"invalid instruction {word:#x} at {pc:#x}")
        name, fields = d
        instr = self.spec.instructions[name]
        effs = execute(instr, fields, pc, self.reg, self.load)
        writes = []
        nxt = None
        for kind, res, idx, v, n in effs:
            if kind == "reg":
                if (res, idx) in self.zero:
                    continue
                self.regs[(res, idx)] = v
                writes.append((res, idx, v))
            elif kind == "mem":
                self.store(n, idx, v)
                writes.append(("MEM", idx, v, n))
            else:
                nxt = v
        self.pc = (nxt if nxt is not None else pc + nunits) & _m(self.pcw)
        return {"pc": pc, "word": word, "name": name, "fields": fields, "writes": writes,
                "next": self.pc, "effects": effs}

    def run(self, stop, max_steps=100_000):
        out = []
        while self.pc != stop and len(out) < max_steps:
            out.append(self.step())
        return out
