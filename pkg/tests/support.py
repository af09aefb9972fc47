"""Helpers shared by several test modules."""
import glob
import os
import random

from pdlkit import DATA_DIR

from oracles.linear_decode import deposit

BASE = 0x8000_0000
STOP = 0xE000_0000
PROGRAMS = sorted(glob.glob(os.path.join(DATA_DIR, "programs", "*.s")))


def program_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def free_fields(instr):
    return [f for f in instr.format.fields.values() if f.name not in instr.encoding]


def random_fields(instr, rng: random.Random) -> dict:
    """All format fields: encoded ones fixed, free ones random."""
    out = {name: v for name, (v, _) in instr.encoding.items()}
    for f in free_fields(instr):
        out[f.name] = rng.getrandbits(f.width)
    return out


def pack(instr, fields) -> int:
    word = 0
    for name, v in fields.items():
        word = deposit(instr.format.fields[name], word, v)
    return word


def words_of(image: bytes, nbytes=4):
    return [int.from_bytes(image[i:i + nbytes], "little") for i in range(0, len(image), nbytes)]


def image_of(words, nbytes=4) -> bytes:
    return b"".join(w.to_bytes(nbytes, "little") for w in words)


def straight_line(n):
    """n independent addi instructions, each writing its own register from x0."""
    return [f"addi x{1 + i % 31}, x0, {i % 2048}" for i in range(n)]


# -- shared differential checks -----------------------------------------------------------
def random_state(sim, rng):
    """A fresh machine state with random registers; memory fills in lazily."""
    st = sim.new_state()
    for i in range(1, 32):
        st.regs[0, i] = rng.getrandbits(32)
    return st


def lazy_memory(st, rng):
    """A load callback that invents each memory unit the first time it is read."""
    def load(addr, n):
        for i in range(n):
            st.mem.setdefault((addr + i) & 0xFFFFFFFF, rng.getrandbits(8))
        return st.read_mem(addr, n)
    return load


def norm_effects(effs):
    # memory and pc effects carry the resource name on one side only
    return sorted((k, r if k == "reg" else None, i, v, n) for k, r, i, v, n in effs)


def iss_agrees_with_ast(sim, instr, rng, count):
    """Run `count` random states through the ISS and the AST interpreter;
    returns the first mismatch as (fields, pc, iss, ast) or None."""
    from oracles.ast_interp import execute
    for _ in range(count):
        fields = random_fields(instr, rng)
        st = random_state(sim, rng)
        pc = rng.getrandbits(32) & ~3
        load = lazy_memory(st, rng)
        want = norm_effects(execute(instr, fields, pc, lambda r, i: st.read_reg(r, i),
                                    lambda n, a: load(a, n)))
        entry = sim.decode_word(pc, pack(instr, fields))
        if entry.name != instr.name:
            return fields, pc, entry.name, instr.name
        got = norm_effects(sim.effects(entry, st, pc))
        if got != want:
            return fields, pc, got, want
    return None


def eval_tree(tree, bind, load):
    """eval_pattern with loads answered from memory."""
    from pdlkit.patterns import PLeaf, POp, eval_pattern
    if isinstance(tree, PLeaf):
        return eval_pattern(tree, bind)
    vals = tuple(eval_tree(a, bind, load) for a in tree.args)
    if tree.op == "load":
        return load(vals[0], tree.attrs[0])
    leaves = tuple(PLeaf("const", "", w, v) for v, w in zip(vals, tree.arg_widths))
    return eval_pattern(POp(tree.op, tree.attrs, tree.width, leaves, tree.arg_widths), bind)


def pattern_agrees_with_iss(sim, instr, pat, rng, count):
    """Evaluate a selection pattern on random bindings and compare with the
    ISS effects of the same instruction; returns the first mismatch or None."""
    from pdlkit.asm import operands_from_fields
    for _ in range(count):
        fields = random_fields(instr, rng)
        ops = operands_from_fields(instr, fields)
        st = random_state(sim, rng)
        pc = rng.getrandbits(32) & ~3
        load = lazy_memory(st, rng)

        def bind(leaf):
            if leaf.kind == "reg":
                return st.read_reg(leaf.file, fields[leaf.name])
            if leaf.kind == "imm":
                return ops[leaf.name] if leaf.name in ops else fields[leaf.name]
            return pc

        value = eval_tree(pat.tree, bind, load)
        effs = sim.effects(sim.decode_word(pc, pack(instr, fields)), st, pc)
        if pat.kind == "set":
            want = [("reg", pat.dst.file, fields[pat.dst.name], value, 1)]
            got = effs
        elif pat.kind == "store":
            want = [("mem", eval_tree(pat.extra, bind, load), value)]
            got = [(e[0], e[2], e[3]) for e in effs]
        else:
            target = eval_tree(pat.extra, bind, load)
            want = [("pc", None, None, target, 1)] if value else []
            got = effs
        if got != want:
            return fields, pc, got, want
    return None
