"""Cycle-accurate simulation of a resolved pipeline model.

Every instruction in flight carries its own node values.  In each cycle the
stages are evaluated from the last (oldest instruction) to the first, each
running only the nodes that resolving scheduled in it.  Architectural
writes commit at the end of the cycle.  A consumer whose register operand
is still being produced further down the pipeline stalls itself and every
earlier stage (a bubble enters the next stage) unless a forwarding path can
supply the value.  Fetch predicts not-taken; the verify stage flushes the
younger stages on a misprediction and fetch restarts at the target in the
next cycle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DivergenceError, DoubleWrite, InvalidInstruction, MaxCycles, MisalignedFetch
from .ir.interp import eval_op
from .iss import MachineState, Simulator, TraceRecord, load_program
from .mia import PipelineModel, forward_stage


class _Stall(Exception):
    pass


class _Unavailable(Exception):
    pass


@dataclass
class _InstrPlan:
    """Per-instruction schedule derived from the pipeline model."""
    name: str
    graph: object
    by_stage: dict  # stage -> [node ids] in topological order
    writes: list  # (effect id, res, stage, forward stage)
    pc_writes: list  # effect ids of PC writes
    effect_pos: dict  # effect id -> position in program order


class _Ctx:
    __slots__ = ("seq", "pc", "word", "entry", "unknown", "vals", "writes", "seen", "plan",
                 "next_pc")

    def __init__(self, seq, pc):
        self.seq, self.pc = seq, pc
        self.word = None
        self.entry = None
        self.unknown = False
        self.vals = {}
        self.writes = []  # (position, name, index, value)
        self.seen = set()
        self.plan = None
        self.next_pc = None


@dataclass
class CasResult:
    cycles: int
    retired: int
    trace: list = field(default_factory=list)
    stalls: int = 0
    flushes: int = 0
    squashed: int = 0
    reason: str = "stop-hit"

    def stats(self) -> str:
        return (f"cycles={self.cycles}\nretired={self.retired}\nstalls={self.stalls}\n"
                f"flushes={self.flushes}\n")


class CycleSimulator:
    def __init__(self, spec, model: PipelineModel, sim: Simulator | None = None):
        self.spec = spec
        self.model = model
        self.sim = sim or Simulator(spec, model.ipg.graphs)
        self.k = model.depth
        self.nunits = self.sim.nunits
        self.mem_name = spec.memory.name if spec.memory else "MEM"
        self.pc_name = spec.pc.name if spec.pc else "PC"
        self.plans = {name: self._plan(name) for name in model.ipg.instrs}
        c = model.control
        self.verify = c.verify_stage if c else model.verify_stage
        self.forwarding = {}
        ipg = model.ipg
        for name in ipg.instrs:
            for gid, nid in ipg.node_map[name].items():
                if ipg[nid].op == "readreg":
                    self.forwarding[(name, gid)] = model.read_logic.get(nid)

    def _plan(self, name):
        g = self.model.ipg.graphs[name]
        sched = self.model.schedule(name)
        by_stage: dict = {}
        for n in g.nodes:
            if n.id in sched:
                by_stage.setdefault(sched[n.id], []).append(n.id)
        writes = []
        pcw = []
        for e in g.effects:
            n = g[e]
            if n.op == "writereg":
                writes.append((e, n.res, sched[e], forward_stage(self.model, name, e)))
            elif n.op == "writepc":
                pcw.append(e)
        return _InstrPlan(name, g, by_stage, writes, pcw, {e: i for i, e in enumerate(g.effects)})

    # node evaluation ---------------------------------------------------------------------
    def _value(self, ctx, nid):
        """Value of a node, computing pure nodes on demand; reads must have run."""
        v = ctx.vals.get(nid)
        if v is not None:
            return v
        g = ctx.plan.graph
        n = g[nid]
        if n.op == "field":
            v = ctx.entry.fields[n.attrs[0]] & ((1 << n.width) - 1)
        elif n.op == "pc":
            v = ctx.pc & ((1 << n.width) - 1)
        elif n.op == "const":
            v = n.attrs[0]
        elif n.op in ("readreg", "readmem") or n.is_effect:
            raise _Unavailable(nid)
        else:
            v = eval_op(n.op, n.attrs, n.width, [self._value(ctx, a) for a in n.args],
                        [g[a].width for a in n.args])
        ctx.vals[nid] = v
        return v

    def _read_reg(self, ctx, s, nid, occ, state):
        g = ctx.plan.graph
        n = g[nid]
        res = n.res
        idx = self._value(ctx, n.args[0]) if n.args else None
        row = state.reg_rows[res]
        if (idx or 0) in state.zero[row]:
            return 0
        logic = self.forwarding.get((ctx.plan.name, nid))
        for p in range(s + 1, self.k):
            prod = occ[p]
            if prod is None or prod.unknown or prod.plan is None:
                continue
            pg = prod.plan.graph
            for e, wres, w, fwd in prod.plan.writes:
                if wres != res or w < p:
                    continue
                en = pg[e]
                try:
                    pidx = self._value(prod, en.index) if en.attrs[1] else None
                    if en.has_guard and not self._value(prod, en.guard):
                        continue
                except _Unavailable:
                    raise _Stall from None
                if pidx != idx:
                    continue
                if logic and fwd <= p:
                    try:
                        return self._value(prod, en.value)
                    except _Unavailable:
                        raise _Stall from None
                raise _Stall
        return state.read_reg(res, idx)

    def _eval_stage(self, ctx, s, occ, state, commits):
        plan = ctx.plan
        g = plan.graph
        tentative = dict(ctx.vals)
        saved = ctx.vals
        ctx.vals = tentative
        effects = []
        try:
            for nid in plan.by_stage.get(s, ()):
                n = g[nid]
                if n.op == "readreg":
                    ctx.vals[nid] = self._read_reg(ctx, s, nid, occ, state)
                elif n.op == "readmem":
                    ctx.vals[nid] = state.read_mem(self._value(ctx, n.args[0]), n.attrs[1])
                elif n.is_effect:
                    if n.has_guard and not self._value(ctx, n.guard):
                        continue
                    effects.append(nid)
                else:
                    self._value(ctx, nid)
        except _Stall:
            ctx.vals = saved
            raise
        for nid in effects:
            n = g[nid]
            if n.op == "writereg":
                idx = self._value(ctx, n.args[0]) if n.attrs[1] else None
                eff = ("reg", n.res, idx, self._value(ctx, n.value), 1)
            elif n.op == "writemem":
                eff = ("mem", None, self._value(ctx, n.args[0]), self._value(ctx, n.value), n.attrs[1])
            else:
                eff = ("pc", None, None, self._value(ctx, n.value), 1)
            commits.append((ctx, plan.effect_pos[nid], eff))

    # main loop ------------------------------------------------------------------------------
    def run(self, state: MachineState, start=None, stop=None, max_cycles=1_000_000) -> CasResult:
        k = self.k
        model = self.model
        sim = self.sim
        fetch_pc = state.pc if start is None else start
        stop = sim.stop if stop is None else stop
        occ = [None] * k
        halted = False
        seq = 0
        res = CasResult(0, 0)
        while True:
            if occ[0] is None and not halted:
                if stop is not None and fetch_pc == stop:
                    halted = True
                else:
                    occ[0] = _Ctx(seq, fetch_pc)
                    seq += 1
                    fetch_pc += self.nunits
            if all(c is None for c in occ):
                break
            res.cycles += 1
            if res.cycles > max_cycles:
                raise MaxCycles(f"no halt within {max_cycles} cycles")
            commits = []
            stall_at = None
            flush_below = None
            redirect = None
            for s in range(k - 1, -1, -1):
                ctx = occ[s]
                if ctx is None:
                    continue
                if flush_below is not None and s < flush_below:
                    break
                if s == model.fetch_stage:
                    if ctx.pc % self.nunits:
                        raise MisalignedFetch(ctx.pc)
                    ctx.word = state.read_mem(ctx.pc, self.nunits)
                if s == model.decode_stage:
                    try:
                        ctx.entry = sim.decode_word(ctx.pc, ctx.word)
                        ctx.plan = self.plans[ctx.entry.name]
                    except InvalidInstruction:
                        ctx.unknown = True
                if ctx.unknown:
                    if s == model.check_stage:
                        raise InvalidInstruction(ctx.pc, ctx.word)
                    continue
                if ctx.plan is None:
                    continue
                try:
                    self._eval_stage(ctx, s, occ, state, commits)
                except _Stall:
                    stall_at = s
                    break
                if s == self.verify:
                    nxt = ctx.pc + self.nunits
                    g = ctx.plan.graph
                    for e in ctx.plan.pc_writes:
                        n = g[e]
                        if not n.has_guard or self._value(ctx, n.guard):
                            nxt = self._value(ctx, n.value)
                    nxt &= (1 << state.pc_width) - 1
                    ctx.next_pc = nxt
                    if nxt != ctx.pc + self.nunits:
                        flush_below, redirect = s, nxt
            # end of cycle: commit oldest first
            written = set()
            for ctx, pos, eff in commits:
                kind, name, idx, v, n = eff
                key = (kind, name, idx) if kind != "mem" else None
                keys = [("mem", (idx + i) & ((1 << state.addr_width) - 1)) for i in range(n)] \
                    if kind == "mem" else [key]
                for kk in keys:
                    if kk in ctx.seen:
                        raise DoubleWrite(f"instruction at {ctx.pc:#x} writes twice")
                    ctx.seen.add(kk)
                if kind == "reg":
                    if state.write_reg(name, idx, v):
                        ctx.writes.append((pos, name, idx, v))
                elif kind == "mem":
                    state.write_mem(idx, n, v)
                    written.update(k_[1] for k_ in keys)
                    ctx.writes.append((pos, self.mem_name, idx, v))
                    # younger instructions fetched from the overwritten words are stale
                    s_store = occ.index(ctx)
                    stale = any(c is not None and c.word is not None
                                and any(a in written for a in range(c.pc, c.pc + self.nunits))
                                for c in occ[:s_store])
                    if stale and (flush_below is None or s_store > flush_below):
                        flush_below = s_store
                        redirect = ctx.next_pc if ctx.next_pc is not None else ctx.pc + self.nunits
                else:
                    ctx.writes.append((pos, self.pc_name, None, v))
            # advance
            new = [None] * k
            last = occ[k - 1]
            if last is not None and (stall_at is None or stall_at < k - 1):
                self._retire(last, res, state)
            if stall_at is None:
                for s in range(k - 1):
                    new[s + 1] = occ[s]
            else:
                res.stalls += 1
                for s in range(stall_at + 1, k - 1):
                    new[s + 1] = occ[s]
                for s in range(stall_at + 1):
                    new[s] = occ[s]
            if flush_below is not None:
                if flush_below > 0:
                    res.flushes += 1
                # the flushed instructions are those that were younger than the verifier
                for s in range(k):
                    c = new[s]
                    if c is not None and c.seq > occ[flush_below].seq:
                        new[s] = None
                        res.squashed += 1
                fetch_pc = redirect
                halted = False
            occ = new
        state.pc = fetch_pc if halted else state.pc
        return res

    def _retire(self, ctx, res, state):
        if ctx.unknown:
            raise InvalidInstruction(ctx.pc, ctx.word)
        res.retired += 1
        state.retired += 1
        writes = [(n, i, v) for _, n, i, v in sorted(ctx.writes, key=lambda w: w[0])]
        res.trace.append(TraceRecord(ctx.pc, ctx.word, ctx.entry.disasm, writes,
                                     self.sim.pc_digits, self.sim.word_digits))


def simulate(spec, model, image, base, start=None, stop=None, max_cycles=1_000_000,
             sim=None) -> CasResult:
    cas = CycleSimulator(spec, model, sim)
    state = cas.sim.new_state()
    load_program(state, image, base)
    if start is not None:
        state.pc = start
    return cas.run(state, stop=stop, max_cycles=max_cycles)


def cosim(spec, model, image, base, start=None, stop=None, max_steps=1_000_000, sim=None):
    """Run the ISS and the CAS on one program and compare retired streams.

    Returns (iss RunResult, CasResult); raises DivergenceError at the first
    retired instruction whose pc, word or writes differ.
    """
    sim = sim or Simulator(spec, model.ipg.graphs)
    st = sim.new_state()
    load_program(st, image, base)
    if start is not None:
        st.pc = start
    ref = sim.run(st, stop=stop, max_steps=max_steps)
    if ref.error is not None:
        raise ref.error
    got = simulate(spec, model, image, base, start, stop, max_cycles=max(64, 64 * max_steps), sim=sim)
    a = [r.line() for r in ref.trace]
    b = [r.line() for r in got.trace]
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            tail_a = "\n".join(a[max(0, i - 3):i + 1])
            tail_b = "\n".join(b[max(0, i - 3):i + 1])
            raise DivergenceError(f"divergence at retired instruction {i}:\niss:\n{tail_a}\ncas:\n{tail_b}", i)
    if len(a) != len(b):
        raise DivergenceError(f"iss retired {len(a)} instructions, cas retired {len(b)}", min(len(a), len(b)))
    return ref, got
