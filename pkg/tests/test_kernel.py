"""The compiled tape kernel, the pure-Python fallback and the graph
evaluator must agree on every effect."""
import random

import numpy as np
import pytest
from hypothesis import given, settings

from pdlkit import kernel
from pdlkit.iss import MachineState
from pdlkit.ir import evaluate_graph
from pdlkit.tape import K_MEM, K_PC, K_REG, compile_tape

from support import random_fields
from test_ir import random_graph


def _state(spec, rng):
    st = MachineState(spec)
    for i in range(1, 32):
        st.regs[0, i] = rng.getrandbits(32)
    return st


def _mem(rng):
    mem = {}

    def read(addr, n):
        v = 0
        for i in reversed(range(n)):
            a = (addr + i) & 0xFFFFFFFF
            mem.setdefault(a, rng.getrandbits(8))
            v = (v << 8) | mem[a]
        return v
    return read


def _from_graph(g, fields, pc, st, read):
    _, fired = evaluate_graph(g, fields, pc, lambda res, i: st.read_reg(res, i),
                              lambda res, n, a: read(a, n))
    out = []
    for e in fired:
        if e.kind == "reg":
            out.append((K_REG, st.reg_rows[e.res], e.index or 0, e.value))
        elif e.kind == "mem":
            out.append((K_MEM, e.n, e.index, e.value))
        else:
            out.append((K_PC, 0, 0, e.value))
    return sorted(out)


def _norm(raw):
    return sorted(tuple(int(x) for x in r) for r in raw)


def test_backend_reported():
    assert kernel.BACKEND in ("cython", "python")


@pytest.mark.skipif(kernel.BACKEND != "cython", reason="extension not built")
def test_compiled_matches_fallback_and_graph(spec, graphs):
    rng = random.Random(21)
    rows = MachineState(spec).reg_rows
    for ins in spec.instr_list():
        g = graphs[ins.name]
        tape = compile_tape(g, rows)
        for _ in range(300):
            fields = random_fields(ins, rng)
            pc = rng.getrandbits(32) & ~3
            st = _state(spec, rng)
            read = _mem(rng)
            want = _from_graph(g, fields, pc, st, read)
            fv = tape.field_vector(fields)
            assert _norm(kernel.run_tape(tape, fv, pc, st.regs, read)) == want, ins.name
            assert _norm(kernel.fallback_run_tape(tape, fv, pc, st.regs, read)) == want, ins.name


def test_fallback_matches_graph(spec, graphs):
    rng = random.Random(22)
    rows = MachineState(spec).reg_rows
    for ins in spec.instr_list():
        g = graphs[ins.name]
        tape = compile_tape(g, rows)
        for _ in range(100):
            fields = random_fields(ins, rng)
            st = _state(spec, rng)
            read = _mem(rng)
            want = _from_graph(g, fields, 0x1000, st, read)
            got = kernel.fallback_run_tape(tape, tape.field_vector(fields), 0x1000, st.regs, read)
            assert _norm(got) == want, ins.name


def test_wide_graph_has_no_tape():
    from pdlkit.ir import BehaviorGraph
    g = BehaviorGraph("w")
    a = g.node("field", (), ("a",), 40)
    m = g.node("umull", (a, a), (), 80)
    g.effect("writepc", (g.node("trunc", (m,), (), 32),), ("PC", False))
    assert compile_tape(g.finish(), {}) is None


@settings(max_examples=200, deadline=None)
@given(random_graph())
def test_random_graphs_agree(gw):
    g, w = gw
    tape = compile_tape(g, {"R": 0})
    regs = np.zeros((1, 1), dtype=np.uint64)
    rng = random.Random(w)
    for _ in range(8):
        fields = {"a": rng.getrandbits(w), "b": rng.getrandbits(w)}
        _, fired = evaluate_graph(g, fields, 0, lambda r, i: 0, lambda r, n, a: 0)
        want = sorted((K_REG if e.kind == "reg" else K_PC, 0, 0, e.value) for e in fired)
        fv = tape.field_vector(fields) if tape.field_names else np.zeros(0, dtype=np.uint64)
        for run in {kernel.run_tape, kernel.fallback_run_tape}:
            assert _norm(run(tape, fv, 0, regs, lambda a, n: 0)) == want
