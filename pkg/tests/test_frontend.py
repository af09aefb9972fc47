import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdlkit import RV32I_SPEC, load_text
from pdlkit.errors import (DoubleWriteError, FormatOverlapError, MacroTypeError, PdlError,
                           SpecImportError, SpecSyntaxError, SpecTypeError, UnknownModel,
                           UnsupportedFeature, WriteBeforeReadError)
from pdlkit.frontend import ast as A
from pdlkit.frontend import elaborate, expand_macros, load_spec, parse_spec
from pdlkit.frontend import model as M
from pdlkit.frontend.unparse import stmt_lines

from oracles.ast_interp import Env, ev


def rv32i_text():
    with open(RV32I_SPEC) as f:
        return f.read()


HEAD = """instruction set architecture T = {
  register file X : Bits<5> -> Bits<32>
  program counter PC : Bits<32>
  format F : Bits<32> = { funct7 : Bits<7>, rs2 : Bits<5>, rs1 : Bits<5>,
                          funct3 : Bits<3>, rd : Bits<5>, opcode : Bits<7> }
%s
}"""

MODEL_M = """
  model M(n : Id, o : BinOp) : IsaDefs = {
    instruction $n : F = X(rd) := X(rs1) $o X(rs2)
    encoding $n = { opcode = 1 }
    assembly $n = (mnemonic)
  }
"""


# -- parsing ----------------------------------------------------------------------------
def test_bundled_source_has_eight_models():
    ast = parse_spec(rv32i_text(), RV32I_SPEC)
    assert ast.count(A.ModelDef) == 8
    (isa,) = [d for d in ast.definitions if isinstance(d, A.IsaDef)]
    assert isa.name == "RV32I"


def test_empty_isa():
    spec = load_text("instruction set architecture X = {}")
    assert spec.name == "X"
    assert spec.instructions == {}


def test_syntax_error_at_end_of_expression():
    with pytest.raises(SpecSyntaxError) as ei:
        parse_spec("constant c = 1 +")
    assert ei.value.span.line == 1
    assert ei.value.span.col == 17


def test_number_separators_and_bases():
    spec = load_text("""instruction set architecture T = {
      constant a = 0b110'0011
      constant b = 0x8000'0000
      constant c = 1'000
    }""")
    assert spec.constants["a"] == (0x63, M.bits(7))
    assert spec.constants["b"] == (0x80000000, M.bits(32))
    assert spec.constants["c"] == (1000, None)


def test_unsupported_constructs_are_named():
    with pytest.raises(UnsupportedFeature, match="raise"):
        load_text(HEAD % """
  instruction I : F = raise Foo
  encoding I = { opcode = 1 }
  assembly I = (mnemonic)""")


# -- macros ----------------------------------------------------------------------------------
def test_bundled_expansion_has_37_instructions():
    ast = expand_macros(parse_spec(rv32i_text(), RV32I_SPEC))
    instrs = [d for d in ast.walk_defs() if isinstance(d, A.InstructionDef)]
    assert len(instrs) == 37
    assert not any(isinstance(d, (A.ModelDef, A.Instantiation)) for d in ast.walk_defs())


def test_model_substitution():
    spec = load_text(HEAD % (MODEL_M + "  $M(ADD ; +)"))
    assert list(spec.instructions) == ["ADD"]
    (w,) = spec.instructions["ADD"].body
    assert w.value.op == "add"


def test_macro_type_error():
    with pytest.raises(MacroTypeError):
        load_text(HEAD % (MODEL_M + "  $M(1 + 2 ; +)"))


def test_unknown_model():
    with pytest.raises(UnknownModel):
        load_text(HEAD % "  $Nope(A)")


def test_expansion_is_idempotent():
    ast = parse_spec(rv32i_text(), RV32I_SPEC)
    once = expand_macros(ast)
    twice = expand_macros(once)
    assert repr(once) == repr(twice)


def test_recursive_model_rejected():
    src = HEAD % """
  model R(n : Id) : IsaDefs = {
    $R($n)
  }
  $R(A)"""
    with pytest.raises(PdlError):
        load_text(src)


# -- elaboration --------------------------------------------------------------------------------
def test_btype_immediate(spec):
    acc = spec.formats["Btype"].accessors["immS"]
    assert acc.ty.width == 32 and acc.ty.signed
    rng = random.Random(1)
    for _ in range(200):
        imm = rng.getrandbits(12)
        v = ev(acc.expr, Env({"imm": imm}, 0, None, None))
        expect = (imm - (1 << 12) if imm >> 11 else imm) * 2
        assert v == expect & 0xFFFFFFFF


def test_write_before_read_and_double_write_both_reported():
    src = HEAD % """
  instruction I : F = { X(rd) := 1  let a = X(rd) in X(rd) := a }
  encoding I = { opcode = 1 }
  assembly I = (mnemonic)"""
    with pytest.raises(WriteBeforeReadError) as ei:
        load_text(src)
    kinds = {type(e) for e in ei.value.all}
    assert kinds == {WriteBeforeReadError, DoubleWriteError}
    assert all(e.span is not None for e in ei.value.all)


def test_format_overlap():
    with pytest.raises(FormatOverlapError):
        load_text("""instruction set architecture T = {
          format G : Bits<16> = { a [7..0], b [8..4] }
        }""")


def test_literal_must_fit():
    with pytest.raises(SpecTypeError):
        load_text("instruction set architecture T = { constant g = 0x0f & 300 }")


def test_zero_register_and_pc(spec):
    assert spec.regfiles["X"].zero == frozenset({0})
    assert spec.pc.width == 32 and spec.pc.semantics == "current"
    assert spec.memory.endian == "little"
    assert spec.processor.start == 0x8000_0000
    assert spec.processor.stop == ("PC", 0xE000_0000)


def test_import_relative(tmp_path):
    (tmp_path / "lib.pdl").write_text("constant K = 0x2a\n")
    (tmp_path / "main.pdl").write_text(
        'import "lib.pdl"\ninstruction set architecture T = {\n  constant L = K + 1\n}\n')
    spec = load_spec(str(tmp_path / "main.pdl"))
    assert spec.constants["L"][0] == 0x2B


def test_import_cycle(tmp_path):
    (tmp_path / "a.pdl").write_text('import "b.pdl"\n')
    (tmp_path / "b.pdl").write_text('import "a.pdl"\n')
    with pytest.raises(SpecImportError):
        load_spec(str(tmp_path / "a.pdl"))


def test_deterministic(spec):
    again = load_spec(RV32I_SPEC)
    for a, b in zip(spec.instr_list(), again.instr_list()):
        assert a.name == b.name
        assert stmt_lines(a.body) == stmt_lines(b.body)
        assert a.encoding.keys() == b.encoding.keys()


def _reads_then_writes(stmts, written, out):
    # a let-bound value is evaluated where its SLet marker sits
    for s in stmts:
        if isinstance(s, (M.SWrite, M.SLet)):
            roots = (s.value,) if isinstance(s, M.SLet) else (s.value, s.index)
            for e in _exprs(*roots):
                if isinstance(e, M.TReadReg) and e.res in written:
                    out.append(e.res)
            if isinstance(s, M.SWrite):
                written.add(s.res)
        elif isinstance(s, M.SIf):
            for e in _exprs(s.cond):
                if isinstance(e, M.TReadReg) and e.res in written:
                    out.append(e.res)
            _reads_then_writes(s.then, set(written), out)
            _reads_then_writes(s.other, set(written), out)


def _exprs(*roots):
    stack = [r for r in roots if r is not None]
    while stack:
        e = stack.pop()
        yield e
        if not isinstance(e, M.TVar):
            stack.extend(e.children())


def test_reads_precede_writes(spec):
    for ins in spec.instr_list():
        bad = []
        _reads_then_writes(ins.body, set(), bad)
        assert not bad, ins.name


def test_every_instruction_has_encoding_and_assembly(spec):
    assert len(spec.instructions) == 37
    for ins in spec.instr_list():
        assert ins.encoding and ins.assembly is not None


# -- constant folding vs a big-integer reference --------------------------------------------------
KINDS = {"bits": "Bits", "sint": "SInt", "uint": "UInt"}


def _fits(v, w):
    return -(1 << (w - 1)) <= v < (1 << w)


def _s(v, w):
    v &= (1 << w) - 1
    return v - (1 << w) if v >> (w - 1) else v


class _Bad(Exception):
    pass


def gen_const(rng, depth):
    """(text, ty, value): ty is None for untyped (exact) values or (kind, width)."""
    r = rng.random()
    if depth == 0 or r < 0.25:
        if rng.random() < 0.5:
            v = rng.randrange(16)
            return str(v), None, v
        digits = rng.choice([1, 2])
        v = rng.getrandbits(4 * digits)
        return f"0x{v:0{digits}x}", ("bits", 4 * digits), v
    if r < 0.4:
        text, ty, v = gen_const(rng, depth - 1)
        kind = rng.choice(list(KINDS))
        w = rng.choice([4, 8, 12])
        if ty is None:
            if not _fits(v, w):
                raise _Bad
            return f"({text} as {KINDS[kind]}<{w}>)", (kind, w), v & ((1 << w) - 1)
        src_kind, sw = ty
        if w <= sw:
            nv = v & ((1 << w) - 1)
        elif kind == "sint":
            nv = _s(v, sw) & ((1 << w) - 1)
        else:
            nv = v
        return f"({text} as {KINDS[kind]}<{w}>)", (kind, w), nv
    op = rng.choice(["+", "-", "*", "&", "|", "^", "<<", ">>"])
    ta, tya, va = gen_const(rng, depth - 1)
    if op in ("<<", ">>"):
        b = rng.randrange(7)
        if tya is None:
            return f"({ta} {op} {b})", None, va << b if op == "<<" else va >> b
        kind, w = tya
        m = (1 << w) - 1
        if op == "<<":
            nv = (va << b) & m
        elif kind == "sint":
            nv = (_s(va, w) >> b) & m
        else:
            nv = va >> b
        return f"({ta} {op} {b})", tya, nv
    tb, tyb, vb = gen_const(rng, depth - 1)
    if tya is None and tyb is None:
        nv = {"+": va + vb, "-": va - vb, "*": va * vb, "&": va & vb, "|": va | vb,
              "^": va ^ vb}[op]
        return f"({ta} {op} {tb})", None, nv
    if tya is None or tyb is None:
        kind, w = tya or tyb
        lit = va if tya is None else vb
        if not _fits(lit, w):
            raise _Bad
        lit &= (1 << w) - 1
        va, vb = (lit, vb) if tya is None else (va, lit)
        ty = (kind, w)
    else:
        if tya[1] != tyb[1]:
            tb = f"({tb} as {KINDS[tyb[0]]}<{tya[1]}>)"
            if tya[1] < tyb[1]:
                vb &= (1 << tya[1]) - 1
            elif tyb[0] == "sint":
                vb = _s(vb, tyb[1]) & ((1 << tya[1]) - 1)
        kinds = {tya[0], tyb[0]}
        kind = "sint" if "sint" in kinds else ("uint" if "uint" in kinds else "bits")
        ty = (kind, tya[1])
    m = (1 << ty[1]) - 1
    nv = {"+": va + vb, "-": va - vb, "*": va * vb, "&": va & vb, "|": va | vb,
          "^": va ^ vb}[op] & m
    return f"({ta} {op} {tb})", ty, nv


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 4))
def test_constant_folding_matches_bigint_reference(rnd, depth):
    try:
        text, ty, v = gen_const(rnd, depth)
    except _Bad:
        return
    spec = load_text(f"instruction set architecture T = {{ constant c = {text} }}")
    got_v, got_ty = spec.constants["c"]
    if ty is None:
        assert got_ty is None
        assert got_v == v, text
    else:
        assert (got_ty.kind, got_ty.width) == ty, text
        assert got_v == v, text


def test_elaborate_requires_expanded_ast():
    ast = parse_spec(HEAD % (MODEL_M + "  $M(ADD ; +)"))
    spec = elaborate(expand_macros(ast))
    assert "ADD" in spec.instructions
