"""Functional instruction-set simulator over canonical behavior graphs.

Each instruction is compiled once to a tape (see tape.py) and run by the
compiled kernel when available.  A decoded-instruction cache maps fetch
addresses to decoded entries; an entry is only reused when the word in
memory still equals the cached word, so self-modifying code re-decodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .asm import format_asm, operands_from_fields
from .decode import build_decoder, decode
from .errors import AddressOverflow, DoubleWrite, InvalidInstruction, MisalignedFetch, PdlError
from .ir import build_all, evaluate_graph
from .tape import K_MEM, K_REG, compile_tape


class MachineState:
    """Architectural state: PC, register matrix, sparse unit-addressed memory."""

    def __init__(self, spec):
        self.spec = spec
        names = list(spec.regfiles) + list(spec.registers)
        self.reg_rows = {n: i for i, n in enumerate(names)}
        self.row_names = names
        self.indexed = [n in spec.regfiles for n in names]
        sizes = [rf.size for rf in spec.regfiles.values()] + [1] * len(spec.registers)
        widths = [rf.elem_width for rf in spec.regfiles.values()]
        widths += [r.width for r in spec.registers.values()]
        self.wide = any(w > 64 for w in widths)
        dtype = object if self.wide else np.uint64
        self.regs = np.zeros((max(len(names), 1), max(sizes, default=1)), dtype=dtype)
        if self.wide:
            self.regs[:] = 0
        self.zero = [frozenset(rf.zero) for rf in spec.regfiles.values()] + [frozenset()] * len(spec.registers)
        mem = spec.memory
        self.unit = mem.unit_width if mem else 8
        self.addr_width = mem.addr_width if mem else 32
        self.big_endian = bool(mem) and mem.endian == "big"
        self.mem: dict[int, int] = {}
        self.pc_width = spec.pc.width if spec.pc else 32
        self.pc = 0
        self.retired = 0

    # registers ---------------------------------------------------------------
    def read_reg(self, name, index=None) -> int:
        return int(self.regs[self.reg_rows[name], index or 0])

    def write_reg(self, name, index, value) -> bool:
        """Store value; False when the index is hardwired and the write is dropped."""
        row = self.reg_rows[name]
        idx = index or 0
        if idx in self.zero[row]:
            return False
        self.regs[row, idx] = value
        return True

    # memory ------------------------------------------------------------------
    def read_mem(self, addr, n=1) -> int:
        amask = (1 << self.addr_width) - 1
        units = [self.mem.get((addr + i) & amask, 0) for i in range(n)]
        if not self.big_endian:
            units.reverse()
        v = 0
        for u in units:
            v = (v << self.unit) | u
        return v

    def write_mem(self, addr, n, value):
        amask = (1 << self.addr_width) - 1
        umask = (1 << self.unit) - 1
        for i in range(n):
            shift = (n - 1 - i) * self.unit if self.big_endian else i * self.unit
            self.mem[(addr + i) & amask] = (value >> shift) & umask

    def snapshot(self):
        """Hashable architectural state, for comparisons in tests."""
        regs = tuple(tuple(int(x) for x in row) for row in self.regs)
        mem = tuple(sorted((a, v) for a, v in self.mem.items() if v))
        return (self.pc, regs, mem)


def load_program(state: MachineState, image, base: int):
    """Copy image units into memory starting at base; PC is left alone."""
    end = base + len(image)
    if base < 0 or end > (1 << state.addr_width):
        raise AddressOverflow(f"image of {len(image)} units at {base:#x} overruns the address space")
    for i, u in enumerate(image):
        state.mem[base + i] = u


@dataclass
class TraceRecord:
    pc: int
    word: int
    disasm: str
    writes: list  # (name, index or None, value)
    pc_digits: int = 8
    word_digits: int = 8

    def line(self) -> str:
        ws = ", ".join(f"{n}={v:x}" if i is None else f"{n}[{i:x}]={v:x}"
                       for n, i, v in self.writes)
        head = f"{self.pc:0{self.pc_digits}x}: {self.word:0{self.word_digits}x} {self.disasm} |"
        return head + " " + ws if ws else head

    def __str__(self):
        return self.line()


@dataclass
class CacheEntry:
    name: str
    fields: dict
    word: int
    fvec: object
    disasm: str


class DecodedCache:
    """Address -> decoded instruction, validated against the current word."""

    def __init__(self):
        self.entries: dict[int, CacheEntry] = {}
        self.hits = self.misses = self.invalidations = 0

    def lookup(self, pc, word):
        e = self.entries.get(pc)
        if e is None:
            self.misses += 1
            return None
        if e.word != word:
            self.invalidations += 1
            return None
        self.hits += 1
        return e

    def insert(self, pc, entry):
        self.entries[pc] = entry


@dataclass
class RunResult:
    steps: int
    reason: str  # stop-hit | max-steps | invalid
    trace: list = field(default_factory=list)
    error: PdlError | None = None


class Simulator:
    """Shared, immutable per-description data: graphs, decoder, tapes."""

    def __init__(self, spec, graphs=None, backend=None):
        self.spec = spec
        self.graphs = graphs if graphs is not None else build_all(spec)
        self.tree = build_decoder(spec)
        self.iwidth = spec.instr_width
        probe = MachineState(spec)
        self.unit = probe.unit
        self.nunits = max(1, self.iwidth // self.unit)
        self.pc_digits = (probe.pc_width + 3) // 4
        self.word_digits = (self.iwidth + 3) // 4
        self.run_tape = backend or kernel.run_tape
        self.tapes = {} if probe.wide else {
            name: compile_tape(g, probe.reg_rows) for name, g in self.graphs.items()}
        proc = spec.processor
        self.start = proc.start if proc and proc.start is not None else 0
        self.stop = proc.stop[1] if proc and proc.stop else None

    def new_state(self) -> MachineState:
        s = MachineState(self.spec)
        s.pc = self.start
        return s

    # decoding ------------------------------------------------------------------
    def fetch(self, state, pc):
        if pc % self.nunits:
            raise MisalignedFetch(pc)
        return state.read_mem(pc, self.nunits)

    def decode_word(self, pc, word) -> CacheEntry:
        d = decode(self.tree, word)
        if not d:
            raise InvalidInstruction(pc, word)
        instr = self.spec.instructions[d.name]
        tape = self.tapes.get(d.name)
        fvec = tape.field_vector(d.fields) if tape is not None else None
        text = format_asm(instr, operands_from_fields(instr, d.fields)) if instr.assembly else d.name.lower()
        return CacheEntry(d.name, d.fields, word, fvec, text)

    # execution -----------------------------------------------------------------
    def effects(self, entry: CacheEntry, state: MachineState, pc: int) -> list:
        """Fired effects as (kind, name-or-None, index, value, n); reads see
        the state before any of them is applied."""
        tape = self.tapes.get(entry.name)
        if tape is not None:
            raw = self.run_tape(tape, entry.fvec, pc, state.regs, state.read_mem)
            out = []
            names = state.row_names
            for kind, aux, idx, v in raw:
                if kind == K_REG:
                    out.append(("reg", names[aux], idx if state.indexed[aux] else None, int(v), 1))
                elif kind == K_MEM:
                    out.append(("mem", None, int(idx), int(v), aux))
                else:
                    out.append(("pc", None, None, int(v), 1))
            return out
        _, fired = evaluate_graph(
            self.graphs[entry.name], entry.fields, pc,
            lambda res, i: state.read_reg(res, i), lambda res, n, a: state.read_mem(a, n))
        out = []
        for e in fired:
            if e.kind == "reg":
                out.append(("reg", e.res, e.index, e.value, 1))
            elif e.kind == "mem":
                out.append(("mem", None, e.index, e.value, e.n))
            else:
                out.append(("pc", None, None, e.value, 1))
        return out

    def apply(self, state: MachineState, effects, pc: int):
        """Commit effects; returns (write records, next pc or None)."""
        check_double_writes(effects, state, pc)
        writes = []
        next_pc = None
        mem_name = self.spec.memory.name if self.spec.memory else "MEM"
        pc_name = self.spec.pc.name if self.spec.pc else "PC"
        for kind, name, idx, v, n in effects:
            if kind == "reg":
                if state.write_reg(name, idx, v):
                    writes.append((name, idx, v))
            elif kind == "mem":
                state.write_mem(idx, n, v)
                writes.append((mem_name, idx, v))
            else:
                next_pc = v
                writes.append((pc_name, None, v))
        return writes, next_pc

    def step(self, state: MachineState, cache: DecodedCache | None = None) -> TraceRecord:
        pc = state.pc
        word = self.fetch(state, pc)
        entry = cache.lookup(pc, word) if cache is not None else None
        if entry is None:
            entry = self.decode_word(pc, word)
            if cache is not None:
                cache.insert(pc, entry)
        effects = self.effects(entry, state, pc)
        writes, next_pc = self.apply(state, effects, pc)
        if next_pc is None:
            next_pc = pc + self.nunits
        state.pc = next_pc & ((1 << state.pc_width) - 1)
        state.retired += 1
        return TraceRecord(pc, word, entry.disasm, writes, self.pc_digits, self.word_digits)

    def run(self, state: MachineState, stop=None, max_steps=1_000_000, use_cache=True,
            keep_trace=True) -> RunResult:
        stop = self.stop if stop is None else stop
        cache = DecodedCache() if use_cache else None
        trace = []
        steps = 0
        while True:
            if stop is not None and state.pc == stop:
                return RunResult(steps, "stop-hit", trace)
            if steps >= max_steps:
                return RunResult(steps, "max-steps", trace)
            try:
                rec = self.step(state, cache)
            except (InvalidInstruction, MisalignedFetch, DoubleWrite) as e:
                return RunResult(steps, "invalid", trace, e)
            steps += 1
            if keep_trace:
                trace.append(rec)


def check_double_writes(effects, state, pc):
    seen = set()
    for kind, name, idx, v, n in effects:
        if kind == "mem":
            keys = [("mem", (idx + i) & ((1 << state.addr_width) - 1)) for i in range(n)]
        else:
            keys = [(kind, name, idx)]
        for k in keys:
            if k in seen:
                raise DoubleWrite(f"instruction at {pc:#x} writes {k[1] if kind != 'mem' else 'memory'} twice")
            seen.add(k)


def trace_text(records) -> str:
    return "".join(r.line() + "\n" for r in records)
