import random

import pytest

from pdlkit.errors import AddressOverflow, InvalidInstruction
from pdlkit.iss import DecodedCache, load_program, trace_text

from oracles.ast_interp import RefMachine
from support import BASE, STOP, iss_agrees_with_ast, straight_line


def _machine(sim, asm, lines, base=BASE):
    image, _ = asm.assemble_text("\n".join(lines), base)
    st = sim.new_state()
    load_program(st, image, base)
    st.pc = base
    return st


def test_addi(sim, asm):
    st = _machine(sim, asm, ["addi x1, x0, 5", "addi x1, x1, 3"])
    sim.step(st)
    rec = sim.step(st)
    assert st.read_reg("X", 1) == 8
    assert st.pc == BASE + 8
    assert rec.writes == [("X", 1, 8)]
    assert rec.line() == f"{BASE + 4:08x}: 00308093 addi x1, x1, 3 | X[1]=8"


def test_backward_branch(sim, asm):
    st = _machine(sim, asm, ["addi x0, x0, 0", "beq x0, x0, -4"])
    sim.step(st)
    sim.step(st)
    assert st.pc == BASE


def test_zero_register_write_dropped(sim, asm):
    st = _machine(sim, asm, ["addi x0, x0, 7"])
    rec = sim.step(st)
    assert st.read_reg("X", 0) == 0
    assert rec.writes == []


def test_max_steps_zero(sim, asm):
    st = _machine(sim, asm, ["addi x1, x0, 1"])
    r = sim.run(st, max_steps=0)
    assert (r.steps, r.reason) == (0, "max-steps")
    assert st.pc == BASE


@pytest.mark.parametrize("n", [1, 10, 100])
def test_straight_line_steps(sim, asm, n):
    st = _machine(sim, asm, straight_line(n))
    r = sim.run(st, stop=BASE + 4 * n)
    assert (r.steps, r.reason) == (n, "stop-hit")


def test_empty_image(sim):
    st = sim.new_state()
    load_program(st, b"", BASE)
    assert st.mem == {}
    r = sim.run(st, max_steps=1)
    assert r.reason == "invalid" and isinstance(r.error, InvalidInstruction)


def test_image_overflow(sim):
    with pytest.raises(AddressOverflow):
        load_program(sim.new_state(), b"\0" * 8, 0xFFFFFFFC)


def test_self_modifying_code_redecodes(sim, corpus):
    st = sim.new_state()
    load_program(st, corpus["selfmod"], BASE)
    cache = DecodedCache()
    while st.pc != STOP:
        sim.step(st, cache)
    assert cache.invalidations == 1
    assert st.read_reg("X", 1) == 101


def test_cache_does_not_change_trace(sim, corpus):
    for name, image in corpus.items():
        runs = []
        for use_cache in (True, False):
            st = sim.new_state()
            load_program(st, image, BASE)
            r = sim.run(st, use_cache=use_cache)
            assert r.reason == "stop-hit", name
            runs.append((trace_text(r.trace), st.snapshot()))
        assert runs[0] == runs[1], name


def test_effects_match_ast_interpreter(spec, sim):
    rng = random.Random(4)
    for ins in spec.instr_list():
        assert iss_agrees_with_ast(sim, ins, rng, 300) is None, ins.name


def test_corpus_matches_reference_machine(spec, sim, corpus):
    for name, image in corpus.items():
        ref = RefMachine(spec)
        ref.load_image(image, BASE)
        ref.pc = BASE
        steps = ref.run(STOP)
        st = sim.new_state()
        load_program(st, image, BASE)
        r = sim.run(st)
        assert r.steps == len(steps), name
        for rec, s in zip(r.trace, steps):
            assert (rec.pc, rec.word) == (s["pc"], s["word"]), name
        assert st.pc == ref.pc
        for i in range(32):
            assert st.read_reg("X", i) == ref.reg("X", i), (name, i)
        assert {a: v for a, v in st.mem.items() if v} == {a: v for a, v in ref.mem.items() if v}


def test_trace_text_format(sim, asm):
    st = _machine(sim, asm, ["sw x0, 0(x0)", "jal x1, 8"])
    r = sim.run(st, max_steps=2)
    lines = trace_text(r.trace).splitlines()
    assert lines[0].endswith("| MEM[0]=0")
    assert lines[1].endswith(f"| X[1]={BASE + 8:x}, PC={BASE + 12:x}")
