import pytest

from pdlkit import cas as cas_mod
from pdlkit.cas import CycleSimulator, cosim, simulate
from pdlkit.errors import DivergenceError, InvalidInstruction, MaxCycles

from oracles.pipeline_oracle import run_program
from support import BASE, STOP, straight_line

MODELS = ["p1", "p2", "p3", "p5", "p5fw"]


def _image(asm, lines):
    return asm.assemble_text("\n".join(lines), BASE)[0]


@pytest.mark.parametrize("name", MODELS)
@pytest.mark.parametrize("n", [1, 10, 100])
def test_straight_line_cycles(spec, models, sim, asm, name, n):
    m = models[name]
    r = simulate(spec, m, _image(asm, straight_line(n)), BASE, BASE, BASE + 4 * n, sim=sim)
    assert r.retired == n
    assert r.cycles == n + m.depth - 1
    assert (r.stalls, r.flushes) == (0, 0)


@pytest.mark.parametrize("name", MODELS)
def test_timing_matches_event_oracle(spec, models, sim, corpus, name):
    for prog, image in corpus.items():
        r = simulate(spec, models[name], image, BASE, BASE, STOP, sim=sim)
        t, stream = run_program(spec, spec.mias[name], image, BASE, BASE, STOP)
        assert r.retired == len(stream), prog
        assert (r.cycles, r.stalls, r.flushes) == (t.cycles, t.stalls, t.flushes), prog


def test_back_to_back_dependency(spec, models, sim, asm):
    img = _image(asm, ["addi x1, x0, 1", "addi x2, x1, 1"])
    stop = BASE + 8
    p5 = simulate(spec, models["p5"], img, BASE, BASE, stop, sim=sim)
    fw = simulate(spec, models["p5fw"], img, BASE, BASE, stop, sim=sim)
    assert p5.stalls == 3 and p5.cycles == 2 + 4 + 3
    assert fw.stalls == 0 and fw.cycles == 2 + 4


def test_load_use_stalls_even_with_forwarding(spec, models, sim, asm):
    img = _image(asm, ["lui x1, 0x80000", "lw x2, 0(x1)", "addi x3, x2, 1"])
    r = simulate(spec, models["p5fw"], img, BASE, BASE, BASE + 12, sim=sim)
    assert r.stalls == 1


def test_zero_register_never_stalls(spec, models, sim, asm):
    img = _image(asm, ["addi x0, x0, 1", "addi x1, x0, 1"])
    r = simulate(spec, models["p5"], img, BASE, BASE, BASE + 8, sim=sim)
    assert r.stalls == 0


def test_taken_branch_flushes(spec, models, sim, asm):
    img = _image(asm, ["jal x0, 8", "addi x1, x0, 1", "addi x2, x0, 2"])
    r = simulate(spec, models["p5"], img, BASE, BASE, BASE + 12, sim=sim)
    assert r.retired == 2 and r.flushes == 1
    assert r.cycles == 2 + 4 + 2  # two wrong-path slots


def test_store_into_fetched_word_flushes(spec, models, sim, corpus):
    r = simulate(spec, models["p5"], corpus["patchnext"], BASE, BASE, STOP, sim=sim)
    t, _ = run_program(spec, spec.mias["p5"], corpus["patchnext"], BASE, BASE, STOP)
    assert r.flushes == t.flushes == 2


@pytest.mark.parametrize("name", MODELS)
def test_corpus_cosimulates(spec, models, sim, corpus, name):
    for prog, image in corpus.items():
        ref, got = cosim(spec, models[name], image, BASE, BASE, STOP, sim=sim)
        assert ref.steps == got.retired, prog


def test_missed_hazard_is_caught(spec, models, sim, asm, monkeypatch):
    orig = CycleSimulator._plan

    def blind(self, name):
        p = orig(self, name)
        p.writes = []  # forget in-flight register producers
        return p

    monkeypatch.setattr(CycleSimulator, "_plan", blind)
    with pytest.raises(DivergenceError) as ei:
        cosim(spec, models["p5"], _image(asm, ["addi x1, x0, 5", "addi x2, x1, 1"]),
              BASE, BASE, BASE + 8, sim=sim)
    assert ei.value.step == 1


def test_empty_program(spec, models, sim):
    r = simulate(spec, models["p5"], b"", BASE, BASE, BASE, sim=sim)
    assert (r.cycles, r.retired) == (0, 0)


def test_invalid_word_raises_at_check(spec, models, sim):
    with pytest.raises(InvalidInstruction):
        simulate(spec, models["p5"], b"\xff" * 4, BASE, BASE, STOP, sim=sim)


def test_max_cycles(spec, models, sim, asm):
    img = _image(asm, ["jal x0, 0"])
    with pytest.raises(MaxCycles):
        simulate(spec, models["p3"], img, BASE, BASE, STOP, max_cycles=50, sim=sim)


def test_stats_text(spec, models, sim, corpus):
    r = simulate(spec, models["p5fw"], corpus["sum"], BASE, BASE, STOP, sim=sim)
    assert r.stats().splitlines()[0] == f"cycles={r.cycles}"
    assert cas_mod.CasResult(1, 1).stats().endswith("flushes=0\n")
