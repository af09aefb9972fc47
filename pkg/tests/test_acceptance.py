"""Acceptance suite.  Each test carries the number of the criterion it
checks; the terminal summary prints one PASS/FAIL line per criterion."""
import random
import subprocess
import sys
import time

import pytest

from pdlkit import RV32I_SPEC, load_text
from pdlkit.asm import assemble, build_grammar, fields_from_operands, format_asm, operands_from_fields
from pdlkit.cas import cosim, simulate
from pdlkit.decode import build_decoder, decode
from pdlkit.errors import ResidualSemanticsError
from pdlkit.iss import DecodedCache, load_program, trace_text
from pdlkit.mia import synthesize
from pdlkit.patterns import SelPattern, emit_patterns, extract_all

from oracles.ast_interp import RefMachine
from oracles.linear_decode import LinearDecoder
from oracles.pipeline_oracle import run_program
from support import (BASE, STOP, iss_agrees_with_ast, pack, pattern_agrees_with_iss,
                     random_fields, straight_line)
from test_mia import INDIRECT, rv32i_text, x_writers

MODELS = ["p1", "p2", "p3", "p5", "p5fw"]


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


# -- 1 --------------------------------------------------------------------------------------
@pytest.mark.criterion(1)
def test_c1_check_reports_37():
    with Budget(1.0):
        r = subprocess.run([sys.executable, "-m", "pdlkit.cli", "check", RV32I_SPEC],
                           capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout == "ok: 37 instructions\n"


# -- 2 --------------------------------------------------------------------------------------
@pytest.mark.criterion(2)
def test_c2_decode(spec):
    with Budget(10.0):
        tree = build_decoder(spec)
        oracle = LinearDecoder(spec)
        rng = random.Random(2)
        instrs = spec.instr_list()
        assert len(instrs) == 37
        for ins in instrs:
            for _ in range(1000):
                fields = random_fields(ins, rng)
                d = decode(tree, pack(ins, fields))
                assert (d.name, d.fields) == (ins.name, fields)
        for _ in range(100_000):
            w = rng.getrandbits(32)
            d = decode(tree, w)
            o = oracle.decode(w)
            assert (None if not d else (d.name, d.fields)) == o, hex(w)


# -- 3 --------------------------------------------------------------------------------------
@pytest.mark.criterion(3)
def test_c3_assembler_round_trips(spec, asm):
    with Budget(30.0):
        grammar = build_grammar(spec)
        assert grammar.overrides == 0
        assert {r.instr for r in grammar.rules} == set(spec.instructions)
        rng = random.Random(3)
        for ins in spec.instr_list():
            for _ in range(1000):
                ops = operands_from_fields(ins, random_fields(ins, rng))
                fields_from_operands(ins, ops, spec)  # predicates hold
                text = format_asm(ins, ops)
                assert asm.parse(text) == (ins.name, ops), text
                word = assemble(ins, ops, spec)
                assert asm.disassemble(word) == text


# -- 4 --------------------------------------------------------------------------------------
@pytest.mark.criterion(4)
def test_c4_iss_against_ast_oracle(spec, sim, corpus):
    with Budget(60.0):
        rng = random.Random(4)
        for ins in spec.instr_list():
            assert iss_agrees_with_ast(sim, ins, rng, 10_000) is None, ins.name
        assert len(corpus) >= 5 and "selfmod" in corpus
        for name, image in corpus.items():
            ref = RefMachine(spec)
            ref.load_image(image, BASE)
            ref.pc = BASE
            steps = ref.run(STOP)
            traces = []
            for use_cache in (True, False):
                st = sim.new_state()
                load_program(st, image, BASE)
                r = sim.run(st, use_cache=use_cache)
                assert r.reason == "stop-hit"
                assert [(t.pc, t.word) for t in r.trace] == [(s["pc"], s["word"]) for s in steps]
                assert [[w for w in t.writes if w[0] != "PC"] for t in r.trace] == \
                    [[w[:3] for w in s["writes"]] for s in steps], name
                traces.append(trace_text(r.trace).encode())
            assert traces[0] == traces[1], name


@pytest.mark.criterion(4)
def test_c4_self_modification_detected(sim, corpus):
    st = sim.new_state()
    load_program(st, corpus["selfmod"], BASE)
    cache = DecodedCache()
    while st.pc != STOP:
        sim.step(st, cache)
    assert cache.invalidations >= 1


# -- 5 --------------------------------------------------------------------------------------
@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", MODELS)
def test_c5_models_resolve(spec, graphs, name):
    m = synthesize(spec, name, graphs)  # raises if anything is left over
    assert all(n.id in m.avail for n in m.ipg.effects())


@pytest.mark.criterion(5)
def test_c5_missing_write_back(spec, graphs):
    text = rv32i_text()
    cut = text.index("instr.write(@X)", text.index("stage WRITE_BACK"))
    broken = load_text(text[:cut] + text[cut + len("instr.write(@X)"):], RV32I_SPEC)
    with pytest.raises(ResidualSemanticsError) as ei:
        synthesize(broken, "p5", graphs)
    writers = x_writers(spec, graphs)
    assert sorted(ei.value.residual) == writers
    assert all(w in str(ei.value) for w in writers)


# -- 6 --------------------------------------------------------------------------------------
@pytest.mark.criterion(6)
def test_c6_ports(models):
    m = models["p5"]
    reads = m.ports["X"]["read"]
    assert len(reads) >= 2
    assert all(m.stages[p.stage].name == "DECODE" for p in reads)
    syn = synthesize(load_text(INDIRECT), "m")
    assert len(syn.ports["X"]["read"]) == 3


# -- 7 --------------------------------------------------------------------------------------
def _timing_cases():
    out = {}
    for gap in range(5):
        out[f"pair{gap}"] = ["addi x1, x0, 3"] + [f"addi x{5 + i}, x0, {i}" for i in range(gap)] \
            + ["add x2, x1, x1"]
        out[f"load{gap}"] = ["lui x3, 0x80000", "lw x1, 0(x3)"] \
            + [f"addi x{5 + i}, x0, {i}" for i in range(gap)] + ["addi x2, x1, 1"]
    out["jal"] = ["jal x0, 8", "addi x1, x0, 1", "addi x2, x0, 2"]
    out["beq-taken"] = ["beq x0, x0, 8", "addi x1, x0, 1", "addi x2, x0, 2"]
    out["bne-not-taken"] = ["bne x0, x0, 8", "addi x1, x0, 1", "addi x2, x0, 2"]
    out["branch-on-load"] = ["lui x3, 0x80000", "lw x1, 0(x3)", "beq x1, x0, 8",
                             "addi x1, x0, 1", "addi x2, x0, 2"]
    return out


@pytest.mark.criterion(7)
def test_c7_cas_timing(spec, models, sim, asm, corpus):
    seen = {"stalls": 0, "flushes": 0}
    with Budget(60.0):
        for name in MODELS:
            m = models[name]
            for n in (1, 10, 100):
                img = asm.assemble_text("\n".join(straight_line(n)), BASE)[0]
                r = simulate(spec, m, img, BASE, BASE, BASE + 4 * n, sim=sim)
                assert r.cycles == n + m.depth - 1, (name, n)
            progs = {k: asm.assemble_text("\n".join(v), BASE)[0] for k, v in _timing_cases().items()}
            progs.update(corpus)
            for prog, img in progs.items():
                stop = BASE + len(img) if prog not in corpus else STOP
                r = simulate(spec, m, img, BASE, BASE, stop, sim=sim)
                t, stream = run_program(spec, spec.mias[name], img, BASE, BASE, stop)
                assert r.retired == len(stream)
                assert (r.cycles, r.stalls, r.flushes) == (t.cycles, t.stalls, t.flushes), (name, prog)
                seen["stalls"] += r.stalls
                seen["flushes"] += r.flushes
    assert seen["stalls"] > 0 and seen["flushes"] > 0  # the cases exercise both


# -- 8 --------------------------------------------------------------------------------------
@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", MODELS)
def test_c8_cas_equals_iss(spec, models, sim, corpus, name):
    for prog, image in corpus.items():
        ref, got = cosim(spec, models[name], image, BASE, BASE, STOP, sim=sim)
        assert trace_text(ref.trace).encode() == trace_text(got.trace).encode(), prog


# -- 9 --------------------------------------------------------------------------------------
@pytest.mark.criterion(9)
def test_c9_patterns(spec, graphs, sim):
    pats = extract_all(spec, graphs)
    assert str(pats["ADD"]) == "set(X:$rd, add(X:$rs1, X:$rs2))"
    rng = random.Random(9)
    checked = 0
    for name, p in pats.items():
        if isinstance(p, SelPattern):
            assert pattern_agrees_with_iss(sim, spec.instructions[name], p, rng, 1000) is None, name
            checked += 1
    assert checked == 35


@pytest.mark.criterion(9)
def test_c9_golden_stable(spec, graphs):
    import os
    with open(os.path.join(os.path.dirname(__file__), "golden", "rv32i.patterns")) as f:
        golden = f.read()
    assert emit_patterns(spec, graphs) == golden
    assert emit_patterns(spec) == golden  # fresh graphs, same text
