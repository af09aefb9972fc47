"""Decoder synthesis from instruction encodings."""
from __future__ import annotations

from dataclasses import dataclass, field

from .bits import popcount
from .errors import AmbiguityError, DuplicatePatternError, EncodingWidthError, UnsupportedFeature


@dataclass(frozen=True)
class EncodingPattern:
    name: str
    width: int
    mask: int
    value: int
    format: object = field(default=None, compare=False, repr=False)

    @property
    def specificity(self) -> int:
        return popcount(self.mask)

    def matches(self, word: int) -> bool:
        return word & self.mask == self.value


def derive_pattern(instr) -> EncodingPattern:
    fmt = instr.format
    mask = value = 0
    for fname, (v, span) in instr.encoding.items():
        f = fmt.fields[fname]
        if v < 0 or v >= (1 << f.width):
            raise EncodingWidthError(
                f"{instr.name}: value {v:#x} does not fit the {f.width}-bit field {fname}", span)
        mask |= f.mask()
        value = f.insert(value, v)
    return EncodingPattern(instr.name, fmt.width, mask, value, fmt)


@dataclass
class Decoded:
    name: str
    fields: dict
    word: int = 0

    def __bool__(self):
        return True


class _Unknown:
    """Result of decoding a word that matches no encoding."""

    def __bool__(self):
        return False

    def __repr__(self):
        return "Unknown"


Unknown = _Unknown()


@dataclass
class Leaf:
    candidates: list  # EncodingPattern, most specific first


@dataclass
class Branch:
    mask: int  # bits inspected at this node
    table: dict  # (word & mask) -> subtree


@dataclass
class DecodeTree:
    width: int
    root: object
    patterns: list

    def leaves(self):
        out = []
        stack = [self.root]
        while stack:
            n = stack.pop()
            if isinstance(n, Leaf):
                out.append(n)
            else:
                stack.extend(n.table.values())
        return out

    def depth(self) -> int:
        def d(n):
            return 0 if isinstance(n, Leaf) else 1 + max(d(c) for c in n.table.values())
        return d(self.root)


def _check_pairs(patterns):
    for i, a in enumerate(patterns):
        for b in patterns[i + 1:]:
            if a.mask == b.mask and a.value == b.value:
                raise DuplicatePatternError(
                    f"{a.name} and {b.name} have identical encodings "
                    f"(mask {a.mask:#x}, value {a.value:#x})")
            overlap = ((a.value ^ b.value) & a.mask & b.mask) == 0
            if overlap and a.specificity == b.specificity:
                witness = a.value | b.value
                raise AmbiguityError(
                    f"{a.name} and {b.name} both match {witness:#x} and neither is more specific",
                    a.name, b.name, witness)


def build_decode_tree(patterns: list) -> DecodeTree:
    patterns = list(patterns)
    widths = {p.width for p in patterns}
    if len(widths) > 1:
        raise UnsupportedFeature("decode trees need instructions of one width")
    width = widths.pop() if widths else 0
    _check_pairs(patterns)

    def build(cands, tested):
        common = ~tested & ((1 << width) - 1)
        for p in cands:
            common &= p.mask
        if len(cands) <= 1 or common == 0:
            return Leaf(sorted(cands, key=lambda p: (-p.specificity, p.name)))
        groups: dict = {}
        for p in cands:
            groups.setdefault(p.value & common, []).append(p)
        return Branch(common, {k: build(v, tested | common) for k, v in sorted(groups.items())})

    return DecodeTree(width, build(patterns, 0), patterns)


def decode(tree: DecodeTree, word: int):
    """Decoded(name, fields) or Unknown."""
    n = tree.root
    while isinstance(n, Branch):
        n = n.table.get(word & n.mask)
        if n is None:
            return Unknown
    for p in n.candidates:
        if word & p.mask == p.value:
            fields = {f.name: f.extract(word) for f in p.format.fields.values()} if p.format else {}
            return Decoded(p.name, fields, word)
    return Unknown


def build_decoder(spec) -> DecodeTree:
    return build_decode_tree([derive_pattern(i) for i in spec.instr_list()])


def decoder_table(tree: DecodeTree) -> str:
    """One line per instruction: name, mask and value in hex."""
    digits = (tree.width + 3) // 4
    lines = [f"{p.name:<10} mask={p.mask:0{digits}x} value={p.value:0{digits}x}"
             for p in tree.patterns]
    return "\n".join(lines) + ("\n" if lines else "")
