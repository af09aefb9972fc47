import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdlkit import load_text
from pdlkit.decode import (EncodingPattern, Unknown, build_decode_tree, build_decoder, decode,
                           decoder_table, derive_pattern)
from pdlkit.errors import DuplicatePatternError, EncodingWidthError

from oracles.linear_decode import LinearDecoder, patterns
from support import pack, random_fields


@pytest.fixture(scope="module")
def tree(spec):
    return build_decoder(spec)


@pytest.fixture(scope="module")
def oracle(spec):
    return LinearDecoder(spec)


def test_patterns_agree_with_oracle(spec):
    want = {n: (m, v) for n, m, v, _ in patterns(spec)}
    for ins in spec.instr_list():
        p = derive_pattern(ins)
        assert (p.mask, p.value) == want[ins.name]


def test_add_pattern(spec):
    p = derive_pattern(spec.instructions["ADD"])
    assert p.mask == 0xFE00707F
    assert p.value == 0x00000033
    assert p.specificity == 17


def test_no_encoding_means_empty_mask():
    spec = load_text("""instruction set architecture T = {
      format F : Bits<8> = { a : Bits<8> }
      instruction I : F = {}
      encoding I = {}
      assembly I = (mnemonic)
    }""")
    p = derive_pattern(spec.instructions["I"])
    assert (p.mask, p.value) == (0, 0)


def test_encoding_width_overflow():
    spec = load_text("""instruction set architecture T = {
      format F : Bits<8> = { op : Bits<7>, b : Bits<1> }
      instruction I : F = {}
      encoding I = { op = 0b1'0000'0000 }
      assembly I = (mnemonic)
    }""")
    with pytest.raises(EncodingWidthError):
        derive_pattern(spec.instructions["I"])


def test_single_pattern_tree():
    t = build_decode_tree([EncodingPattern("A", 8, 0xF0, 0x30)])
    (leaf,) = t.leaves()
    assert [p.name for p in leaf.candidates] == ["A"]
    assert decode(t, 0x3C).name == "A"
    assert not decode(t, 0x4C)


def test_duplicate_patterns():
    with pytest.raises(DuplicatePatternError):
        build_decode_tree([EncodingPattern("A", 8, 0xF0, 0x30), EncodingPattern("B", 8, 0xF0, 0x30)])


def test_more_specific_wins():
    t = build_decode_tree([EncodingPattern("GEN", 8, 0xF0, 0x30), EncodingPattern("SPEC", 8, 0xFF, 0x35)])
    assert decode(t, 0x35).name == "SPEC"
    assert decode(t, 0x36).name == "GEN"


def test_every_instruction_decodes_from_its_value(spec, tree):
    for ins in spec.instr_list():
        p = derive_pattern(ins)
        assert decode(tree, p.value).name == ins.name


def test_all_ones_is_unknown(tree, oracle):
    assert decode(tree, 0xFFFFFFFF) is Unknown
    assert oracle.decode(0xFFFFFFFF) is None


def test_unmasked_bits_ignored(spec, tree):
    p = derive_pattern(spec.instructions["ADD"])
    w = p.value | (0x1F << 7) | (3 << 15)
    d = decode(tree, w)
    assert d.name == "ADD" and d.fields["rd"] == 31 and d.fields["rs1"] == 3


def test_round_trip_free_fields(spec, tree):
    rng = random.Random(7)
    for ins in spec.instr_list():
        for _ in range(200):
            fields = random_fields(ins, rng)
            d = decode(tree, pack(ins, fields))
            assert d.name == ins.name
            assert d.fields == fields


@settings(max_examples=2000, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_words_match_linear_scan(tree, oracle, word):
    d = decode(tree, word)
    o = oracle.decode(word)
    if o is None:
        assert not d
    else:
        assert (d.name, d.fields) == o


def test_table_lists_every_instruction(spec, tree):
    text = decoder_table(tree)
    assert len(text.splitlines()) == 37
    assert "ADD        mask=fe00707f value=00000033" in text


def test_tree_is_shallower_than_linear(spec, tree):
    assert tree.depth() < len(spec.instructions)
