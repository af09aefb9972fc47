"""Pure-Python tape interpreter, used when the compiled kernel is missing."""
from .bits import apply_op, sext
from .tape import K_MEM, K_PC, K_REG, OPNAMES

_F, _PC, _RR, _RM = 0, 1, 2, 3
_NOT, _NEG = 4, 5
_BIN_LO, _BIN_HI = 6, 26
_SEXT, _ZEXT, _TRUNC, _SLICE, _CAT, _SEL = 27, 28, 29, 30, 31, 32
_WR, _WM, _WP = 33, 34, 35

assert OPNAMES[_SEL] == "select" and OPNAMES[_WP] == "writepc"

BACKEND = "python"


def run_tape(tape, fields, pc, regs, mem_read):
    """Evaluate a tape; returns the fired effects as
    (kind, row-or-size, index, value) tuples in program order."""
    vals = list(tape.init_list)
    out = []
    for op, dst, a, b, c, w, aux, aw in tape.rows:
        m = (1 << w) - 1
        if op < _NOT:
            if op == _F:
                vals[dst] = int(fields[a]) & m
            elif op == _PC:
                vals[dst] = pc & m
            elif op == _RR:
                vals[dst] = int(regs[aux, vals[a] if a >= 0 else 0])
            else:
                vals[dst] = mem_read(vals[a], aux)
        elif op <= _BIN_HI:
            if op == _NOT:
                vals[dst] = ~vals[a] & m
            elif op == _NEG:
                vals[dst] = -vals[a] & m
            else:
                vals[dst] = apply_op(OPNAMES[op], vals[a], vals[b], aw) & m
        elif op < _WR:
            if op == _SEXT:
                vals[dst] = sext(vals[a], aw) & m
            elif op == _ZEXT or op == _TRUNC:
                vals[dst] = vals[a] & m
            elif op == _SLICE:
                vals[dst] = (vals[a] >> aux) & m
            elif op == _CAT:
                vals[dst] = (vals[a] << aux) | vals[b]
            else:
                vals[dst] = vals[b] if vals[a] else vals[c]
        else:
            if c >= 0 and not vals[c]:
                continue
            if op == _WR:
                out.append((K_REG, aux, vals[a] if a >= 0 else 0, vals[b]))
            elif op == _WM:
                out.append((K_MEM, aux, vals[a], vals[b]))
            else:
                out.append((K_PC, 0, 0, vals[b]))
    return out
