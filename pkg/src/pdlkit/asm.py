"""Assembly printing, grammar inference by inverting the printer, parsing,
assembling and disassembling."""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .bits import sext, trunc
from .decode import build_decoder, decode, derive_pattern
from .errors import (AsmParseError, DomainTooLarge, GrammarError, MissingOperand,
                     NoMatchingInstruction, NonInjective, OperandRangeError, PredicateViolation,
                     UnknownInstructionWord)
from .frontend import model as M
from .frontend.evaluate import EvalEnv, NotConstant, evaluate

ENUM_LIMIT = 1 << 16

# -- tokens -----------------------------------------------------------------
_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<int>[-+]?(?:0[xX][0-9a-fA-F]+|0[bB][01]+|[0-9]+))
  | (?P<ident>[A-Za-z_.][A-Za-z0-9_.]*)
  | (?P<punct>.)
""", re.VERBOSE)


@dataclass(frozen=True)
class AsmToken:
    kind: str  # ident | int | punct
    text: str
    pos: int
    value: int | None = None


def tokenize(text: str) -> list[AsmToken]:
    out = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        s = m.group()
        val = int(s, 0) if kind == "int" else None
        if kind == "int" and re.fullmatch(r"[-+]?0[0-9]+", s):
            val = int(s, 10)
        out.append(AsmToken(kind, s, m.start(), val))
    return out


def _texts(tokens):
    return tuple(t.text for t in tokens)


# -- rendering ----------------------------------------------------------------
def render_number(base: str, v: int) -> str:
    if base == "hex":
        return f"-{-v:#x}" if v < 0 else f"{v:#x}"
    return str(v)


def _fields_in(e) -> list:
    """Names of format fields referenced by a typed expression, in first-use order."""
    out = []
    stack = [e]
    seen = set()
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if isinstance(x, M.TField) and x.name not in out:
            out.append(x.name)
        stack.extend(reversed(x.children()))
    return out


def _asm_fields(node) -> list:
    if isinstance(node, M.AConcat):
        return list(dict.fromkeys(f for it in node.items for f in _asm_fields(it)))
    if isinstance(node, M.ARegister):
        return [node.field]
    if isinstance(node, M.ANumber):
        return _fields_in(node.expr)
    if isinstance(node, M.AIf):
        return list(dict.fromkeys(_fields_in(node.cond) + _asm_fields(node.then) + _asm_fields(node.other)))
    if isinstance(node, M.AMatch):
        fs = _fields_in(node.scrutinee)
        for _, c in node.cases:
            fs += _asm_fields(c)
        return list(dict.fromkeys(fs + _asm_fields(node.default)))
    return []


def operand_names(instr: M.Instruction) -> list:
    """Names making up an OperandSet of this instruction (besides the mnemonic)."""
    out = []

    def walk(n):
        if isinstance(n, M.AConcat):
            for it in n.items:
                walk(it)
        elif isinstance(n, M.ARegister):
            out.append(n.field)
        elif isinstance(n, M.ANumber) and n.operand is not None:
            out.append(n.operand)
        elif isinstance(n, (M.ANumber, M.AIf, M.AMatch)):
            out.extend(_asm_fields(n))

    walk(instr.assembly)
    return list(dict.fromkeys(out))


def _signed_of(ty):
    return ty is not None and ty.signed


def _eval_asm(node, instr, ops, fields):
    if isinstance(node, M.AConcat):
        return "".join(_eval_asm(i, instr, ops, fields) for i in node.items)
    if isinstance(node, M.AStr):
        return node.text
    if isinstance(node, M.AMnemonic):
        return instr.name.lower()
    if isinstance(node, M.ARegister):
        if node.field not in ops:
            raise MissingOperand(f"{instr.name}: missing operand {node.field}")
        return f"{node.prefix}{ops[node.field]}"
    if isinstance(node, M.ANumber):
        if node.operand is not None:
            if node.operand not in ops:
                raise MissingOperand(f"{instr.name}: missing operand {node.operand}")
            return render_number(node.base, ops[node.operand])
        v = evaluate(node.expr, EvalEnv(fields))
        if _signed_of(node.expr.ty):
            v = sext(v, node.expr.ty.width)
        return render_number(node.base, v)
    if isinstance(node, M.AIf):
        c = evaluate(node.cond, EvalEnv(fields))
        return _eval_asm(node.then if c else node.other, instr, ops, fields)
    if isinstance(node, M.AMatch):
        v = evaluate(node.scrutinee, EvalEnv(fields))
        for cv, sub in node.cases:
            if cv == v:
                return _eval_asm(sub, instr, ops, fields)
        return _eval_asm(node.default, instr, ops, fields)
    raise TypeError(node)


def format_asm(instr: M.Instruction, ops: dict) -> str:
    """Render an instruction from its operand set."""
    fields = {f: ops[f] for f in _asm_fields(instr.assembly) if f in ops}
    try:
        return _eval_asm(instr.assembly, instr, ops, fields)
    except NotConstant as e:
        raise MissingOperand(f"{instr.name}: missing operand {e.args[0]}") from None


# -- operand <-> raw field conversion ------------------------------------------------
def accessor_value(acc: M.Accessor, fields: dict) -> int:
    v = evaluate(acc.expr, EvalEnv(fields))
    return sext(v, acc.ty.width) if acc.ty.signed else v


def operands_from_fields(instr: M.Instruction, fields: dict) -> dict:
    ops = {}
    for name in operand_names(instr):
        acc = instr.format.accessors.get(name)
        ops[name] = accessor_value(acc, fields) if acc is not None else fields[name]
    return ops


def _regfile_size(spec, instr, fname):
    for n in _iter_asm(instr.assembly):
        if isinstance(n, M.ARegister) and n.field == fname and spec is not None:
            return spec.regfiles[n.file].size
    return None


def _iter_asm(node):
    yield node
    if isinstance(node, M.AConcat):
        for it in node.items:
            yield from _iter_asm(it)
    elif isinstance(node, M.AIf):
        yield from _iter_asm(node.then)
        yield from _iter_asm(node.other)
    elif isinstance(node, M.AMatch):
        for _, c in node.cases:
            yield from _iter_asm(c)
        yield from _iter_asm(node.default)


def fields_from_operands(instr: M.Instruction, ops: dict, spec=None) -> dict:
    """Raw field values for an operand set: predicates first, then encodings."""
    fmt = instr.format
    fields = {}
    for name in operand_names(instr):
        if name not in ops:
            raise MissingOperand(f"{instr.name}: missing operand {name}")
        v = ops[name]
        if name in fmt.fields:
            f = fmt.fields[name]
            size = _regfile_size(spec, instr, name)
            hi = size if size is not None else 1 << f.width
            if not 0 <= v < hi:
                raise OperandRangeError(f"{instr.name}: operand {name}={v} outside 0..{hi - 1}")
            fields[name] = v
            continue
        acc = fmt.accessors[name]
        w = acc.ty.width
        lo, hi = (-(1 << (w - 1)), 1 << (w - 1)) if acc.ty.signed else (0, 1 << w)
        if not lo <= v < hi:
            raise OperandRangeError(f"{instr.name}: operand {name}={v} does not fit {acc.ty}")
        pv = trunc(v, w)
        env = EvalEnv(params={name: pv})
        for cond, desc in acc.predicate:
            if not evaluate(cond, env):
                raise PredicateViolation(name, v, desc)
        if acc.encoding:
            for fname, e in acc.encoding.items():
                fields[fname] = evaluate(e, env)
        elif acc.trivial is not None:
            fields[acc.trivial] = trunc(pv, fmt.fields[acc.trivial].width)
        else:
            raise OperandRangeError(f"{instr.name}: no encoding for operand {name}")
        back = accessor_value(acc, {**{k: 0 for k in fmt.fields}, **fields})
        if back != v:
            raise OperandRangeError(f"{instr.name}: operand {name}={v} is not representable")
    return fields


def assemble(instr: M.Instruction, ops: dict, spec=None) -> int:
    fields = fields_from_operands(instr, ops, spec)
    pat = derive_pattern(instr)
    word = pat.value
    for fname, v in fields.items():
        word = instr.format.fields[fname].insert(word, v)
    return word


# -- grammar ---------------------------------------------------------------------
@dataclass(frozen=True)
class Literal:
    text: str

    @property
    def tokens(self):
        return _texts(tokenize(self.text))


@dataclass(frozen=True)
class Operand:
    name: str
    kind: str  # register | immediate | enum
    prefix: str = ""  # register name prefix
    size: int = 0  # register count
    base: str = "decimal"
    table: tuple = ()  # enum: ((token texts), assignment tuple)
    fields: tuple = ()  # enum: names of the enumerated fields


@dataclass
class GrammarRule:
    instr: str
    elements: list
    source: str = "direct-inversion"

    @property
    def literal_chars(self) -> int:
        return sum(len(e.text.replace(" ", "")) for e in self.elements if isinstance(e, Literal))

    @property
    def mnemonic(self) -> str:
        for e in self.elements:
            if isinstance(e, Literal) and e.tokens:
                return e.tokens[0]
        return ""

    def render(self, ops: dict) -> str:
        out = []
        for e in self.elements:
            if isinstance(e, Literal):
                out.append(e.text)
            elif e.kind == "register":
                out.append(f"{e.prefix}{ops[e.name]}")
            elif e.kind == "immediate":
                out.append(render_number(e.base, ops[e.name]))
            else:
                key = tuple(ops[f] for f in e.fields)
                out.append(next(" ".join(t) for t, a in e.table if a == key))
        return "".join(out)


def _merge_literals(elems):
    out = []
    for e in elems:
        if isinstance(e, Literal) and out and isinstance(out[-1], Literal):
            out[-1] = Literal(out[-1].text + e.text)
        else:
            out.append(e)
    return out


def _enumerate(node, instr, limit):
    fields = _asm_fields(node)
    fmt = instr.format
    size = 1
    for f in fields:
        size *= 1 << fmt.fields[f].width
    if size > limit:
        raise DomainTooLarge(
            f"{instr.name}: assembly subexpression needs {size} evaluations "
            f"(limit {limit}); supply an explicit template", size)
    table = []
    seen = {}
    ranges = [range(1 << fmt.fields[f].width) for f in fields]
    for combo in itertools.product(*ranges):
        fv = dict(zip(fields, combo))
        ops = dict(fv)
        for a in fmt.accessors.values():
            if any(x in fv for x in _fields_in(a.expr)) and set(_fields_in(a.expr)) <= set(fv):
                ops[a.name] = accessor_value(a, fv)
        text = _texts(tokenize(_eval_asm(node, instr, ops, fv)))
        if text in seen:
            raise NonInjective(f"{instr.name}: {seen[text]} and {combo} both print as "
                               f"{' '.join(text)!r}", (seen[text], combo))
        seen[text] = combo
        table.append((text, combo))
    # longest token sequences first so parsing is greedy
    table.sort(key=lambda t: -len(t[0]))
    return Operand("/".join(fields), "enum", table=tuple(table), fields=tuple(fields))


def infer_grammar(instr: M.Instruction, spec=None, limit: int = ENUM_LIMIT,
                  override: str | None = None) -> GrammarRule:
    if override is not None:
        return _override_rule(instr, spec, override)
    elems = []

    def walk(n):
        if isinstance(n, M.AConcat):
            for it in n.items:
                walk(it)
        elif isinstance(n, M.AStr):
            elems.append(Literal(n.text))
        elif isinstance(n, M.AMnemonic):
            elems.append(Literal(instr.name.lower()))
        elif isinstance(n, M.ARegister):
            size = spec.regfiles[n.file].size if spec is not None else 1 << instr.format.fields[n.field].width
            elems.append(Operand(n.field, "register", n.prefix, size))
        elif isinstance(n, M.ANumber) and n.operand is not None:
            elems.append(Operand(n.operand, "immediate", base=n.base))
        else:
            elems.append(_enumerate(n, instr, limit))

    walk(instr.assembly)
    rule = GrammarRule(instr.name, _merge_literals(elems),
                       "direct-inversion" if not any(getattr(e, "kind", "") == "enum" for e in elems)
                       else "enumeration")
    _check_separable(rule)
    return rule


def _override_rule(instr, spec, template):
    elems = []
    regs = {n.field: n for n in _iter_asm(instr.assembly) if isinstance(n, M.ARegister)}
    for part in re.split(r"(\{[A-Za-z_][A-Za-z0-9_]*\})", template):
        if not part:
            continue
        if part.startswith("{"):
            name = part[1:-1]
            if name in regs:
                r = regs[name]
                size = spec.regfiles[r.file].size if spec is not None else 32
                elems.append(Operand(name, "register", r.prefix, size))
            elif name in instr.format.fields or name in instr.format.accessors:
                elems.append(Operand(name, "immediate"))
            else:
                raise GrammarError(f"{instr.name}: template names unknown operand {name}")
        else:
            elems.append(Literal(part))
    rule = GrammarRule(instr.name, _merge_literals(elems), "explicit-override")
    _check_separable(rule)
    return rule


def _check_separable(rule):
    prev_operand = False
    for e in rule.elements:
        if isinstance(e, Literal):
            if any(not re.fullmatch(r"[A-Za-z0-9_.]*", t) for t in e.tokens):
                prev_operand = False
            continue
        if prev_operand:
            raise GrammarError(f"{rule.instr}: adjacent operands are not separated by punctuation")
        prev_operand = True


class Grammar:
    """All rules of an instruction set, indexed by mnemonic."""

    def __init__(self, rules: list):
        self.rules = rules
        self.by_mnemonic: dict = {}
        for r in rules:
            self.by_mnemonic.setdefault(r.mnemonic, []).append(r)
        for m, rs in self.by_mnemonic.items():
            rs.sort(key=lambda r: -r.literal_chars)
            for a, b in zip(rs, rs[1:]):
                if a.literal_chars == b.literal_chars:
                    raise GrammarError(f"rules for {a.instr} and {b.instr} share mnemonic {m!r} "
                                       f"and are equally specific")

    @property
    def overrides(self) -> int:
        return sum(r.source == "explicit-override" for r in self.rules)


def build_grammar(spec, overrides: dict | None = None, limit: int = ENUM_LIMIT) -> Grammar:
    overrides = overrides or {}
    return Grammar([infer_grammar(i, spec, limit, overrides.get(i.name)) for i in spec.instr_list()])


def _match(rule: GrammarRule, toks, line):
    """Returns (ops, None) on success or (None, (position, expected))."""
    i = 0
    ops = {}
    for e in rule.elements:
        if isinstance(e, Literal):
            for lt in e.tokens:
                if i >= len(toks) or toks[i].text != lt:
                    return None, (i, {lt})
                i += 1
            continue
        if i >= len(toks):
            return None, (i, {f"<{e.name}>"})
        t = toks[i]
        if e.kind == "register":
            m = re.fullmatch(re.escape(e.prefix) + r"([0-9]+)", t.text) if t.kind == "ident" else None
            if not m:
                return None, (i, {f"{e.prefix}<n>"})
            idx = int(m.group(1))
            if idx >= e.size:
                raise OperandRangeError(f"register {t.text} outside {e.prefix}0..{e.prefix}{e.size - 1}")
            ops[e.name] = idx
            i += 1
        elif e.kind == "immediate":
            if t.kind != "int":
                return None, (i, {"<integer>"})
            ops[e.name] = t.value
            i += 1
        else:
            for texts, assignment in e.table:
                if _texts(toks[i:i + len(texts)]) == texts:
                    ops.update(zip(e.fields, assignment))
                    i += len(texts)
                    break
            else:
                return None, (i, {"<" + "/".join(e.fields) + ">"})
    if i != len(toks):
        return None, (i, {"<end of line>"})
    return ops, None


def parse_asm(line: str, grammar: Grammar):
    """(instruction name, OperandSet) for one assembly statement."""
    toks = tokenize(line)
    if not toks:
        raise AsmParseError("empty statement", 0, ["<mnemonic>"])
    if toks[0].kind != "ident":
        raise AsmParseError(f"expected a mnemonic, found {toks[0].text!r}", toks[0].pos, ["<mnemonic>"])
    rules = grammar.by_mnemonic.get(toks[0].text.lower())
    if not rules:
        raise NoMatchingInstruction(f"unknown mnemonic {toks[0].text!r}")
    toks = [AsmToken(toks[0].kind, toks[0].text.lower(), toks[0].pos)] + toks[1:]
    best = None
    for r in rules:
        ops, err = _match(r, toks, line)
        if ops is not None:
            return r.instr, ops
        if best is None or err[0] > best[0]:
            best = err
        elif err[0] == best[0]:
            best = (best[0], best[1] | err[1])
    pos = toks[best[0]].pos if best[0] < len(toks) else len(line)
    found = repr(toks[best[0]].text) if best[0] < len(toks) else "end of line"
    raise AsmParseError(f"expected {' or '.join(repr(x) for x in sorted(best[1]))}, found {found}", pos, sorted(best[1]))


# -- high level --------------------------------------------------------------------
class Assembler:
    """Convenience bundle: grammar, decoder and lookups for one SpecModel."""

    def __init__(self, spec, overrides: dict | None = None):
        self.spec = spec
        self.grammar = build_grammar(spec, overrides)
        self.tree = build_decoder(spec)
        self.instrs = spec.instructions
        self.width = spec.instr_width

    def parse(self, line):
        return parse_asm(line, self.grammar)

    def assemble_line(self, line) -> int:
        name, ops = self.parse(line)
        return assemble(self.instrs[name], ops, self.spec)

    def disassemble(self, word: int) -> str:
        return disassemble(self.tree, word, self.spec)

    def assemble_text(self, text: str, base: int = 0):
        """(image bytes, listing text) for a program, one statement per line.

        `name:` defines a label; a label used as an operand becomes its
        offset from the referencing instruction, which suits PC-relative
        branches and jumps.  `.word <n>` emits a raw word.
        """
        nbytes = self.width // 8
        stmts = []
        labels = {}
        for ln, raw in enumerate(text.splitlines(), 1):
            src = raw.split("#", 1)[0].strip()
            while True:
                m = _LABEL.match(src)
                if not m:
                    break
                labels[m.group(1)] = base + len(stmts) * nbytes
                src = src[m.end():].strip()
            if src:
                stmts.append((ln, src))
        image = bytearray()
        listing = []
        for ln, src in stmts:
            addr = base + len(image)
            try:
                if src.startswith(".word"):
                    word = int(src[5:].strip(), 0) & ((1 << self.width) - 1)
                else:
                    word = self.assemble_line(_subst_labels(src, labels, addr))
            except (AsmParseError, NoMatchingInstruction, OperandRangeError, PredicateViolation) as e:
                e.args = (f"line {ln}: {e.args[0]}",)
                e.message = f"line {ln}: {e.message}"
                raise
            except ValueError:
                raise AsmParseError(f"line {ln}: bad .word value") from None
            image += word.to_bytes(nbytes, "little")
            listing.append(f"{addr:08x}: {word:0{nbytes * 2}x}  {src}")
        return bytes(image), "\n".join(listing) + ("\n" if listing else "")


_LABEL = re.compile(r"([A-Za-z_.][\w.]*):")


def _subst_labels(src, labels, addr):
    head, _, rest = src.partition(" ")
    if not rest or not labels:
        return src
    return head + " " + re.sub(r"[A-Za-z_.][\w.]*",
                               lambda m: str(labels[m.group(0)] - addr) if m.group(0) in labels else m.group(0),
                               rest)


def disassemble(tree, word: int, spec) -> str:
    d = decode(tree, word)
    if not d:
        raise UnknownInstructionWord(f"no instruction matches {word:#x}")
    instr = spec.instructions[d.name]
    ops = operands_from_fields(instr, d.fields)
    return format_asm(instr, ops)
