# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape interpreter.  Mirrors _fallback.run_tape exactly."""
from libc.stdint cimport int64_t, uint64_t
import numpy as np

BACKEND = "cython"

cdef enum:
    F = 0
    PC = 1
    RR = 2
    RM = 3
    NOT = 4
    NEG = 5
    ADD = 6
    SUB = 7
    MUL = 8
    AND = 9
    OR = 10
    XOR = 11
    SHL = 12
    LSHR = 13
    ASHR = 14
    EQ = 15
    NE = 16
    ULT = 17
    ULE = 18
    SLT = 19
    SLE = 20
    UDIV = 21
    UREM = 22
    SDIV = 23
    SREM = 24
    UMULL = 25
    SMULL = 26
    SEXT = 27
    ZEXT = 28
    TRUNC = 29
    SLICE = 30
    CAT = 31
    SEL = 32
    WR = 33
    WM = 34
    WP = 35


cdef inline uint64_t _mask(int64_t w) nogil:
    if w >= 64:
        return 0xFFFFFFFFFFFFFFFFULL
    return (<uint64_t>1 << w) - 1


cdef inline int64_t _sx(uint64_t v, int64_t w) nogil:
    if w >= 64:
        return <int64_t>v
    if w == 0:
        return 0
    v &= _mask(w)
    if (v >> (w - 1)) & 1:
        return <int64_t>(v | ~_mask(w))
    return <int64_t>v


cdef inline uint64_t _mag(int64_t s) nogil:
    # |s| as an unsigned value, well-defined for INT64_MIN
    if s < 0:
        return <uint64_t>0 - <uint64_t>s
    return <uint64_t>s


cdef uint64_t _binop(int64_t op, uint64_t x, uint64_t y, int64_t aw):
    cdef uint64_t m = _mask(aw)
    cdef int64_t sx, sy
    cdef uint64_t q, sh
    if op == ADD:
        return (x + y) & m
    if op == SUB:
        return (x - y) & m
    if op == MUL:
        return (x * y) & m
    if op == AND:
        return x & y
    if op == OR:
        return x | y
    if op == XOR:
        return x ^ y
    if op == SHL:
        return (x << y) & m if y < <uint64_t>aw else 0
    if op == LSHR:
        return x >> y if y < <uint64_t>aw else 0
    if op == ASHR:
        sh = y if y < <uint64_t>aw else <uint64_t>aw
        if sh > 63:
            sh = 63
        return (<uint64_t>(_sx(x, aw) >> sh)) & m
    if op == EQ:
        return x == y
    if op == NE:
        return x != y
    if op == ULT:
        return x < y
    if op == ULE:
        return x <= y
    if op == SLT:
        return _sx(x, aw) < _sx(y, aw)
    if op == SLE:
        return _sx(x, aw) <= _sx(y, aw)
    if op == UDIV:
        return m if y == 0 else x // y
    if op == UREM:
        return x if y == 0 else x % y
    if op == SDIV or op == SREM:
        sx = _sx(x, aw)
        sy = _sx(y, aw)
        if sy == 0:
            return m if op == SDIV else x
        if op == SDIV:
            q = _mag(sx) // _mag(sy)
            if (sx < 0) != (sy < 0):
                q = <uint64_t>0 - q
            return q & m
        q = _mag(sx) % _mag(sy)
        if sx < 0:
            q = <uint64_t>0 - q
        return q & m
    if op == UMULL:
        return x * y
    if op == SMULL:
        return <uint64_t>_sx(x, aw) * <uint64_t>_sx(y, aw)
    raise ValueError(op)


def run_tape(tape, fields, uint64_t pc, regs, mem_read):
    """Evaluate a tape; returns fired effects as (kind, aux, index, value)."""
    cdef const int64_t[:, ::1] t = tape.array
    cdef uint64_t[::1] vals = tape.init.copy()
    cdef const uint64_t[::1] fv = fields
    cdef uint64_t[:, ::1] rf = regs
    cdef Py_ssize_t i, n = t.shape[0]
    cdef int64_t op, dst, a, b, c, w, aux, aw
    cdef uint64_t m, v
    out = []
    for i in range(n):
        op = t[i, 0]
        dst = t[i, 1]
        a = t[i, 2]
        b = t[i, 3]
        c = t[i, 4]
        w = t[i, 5]
        aux = t[i, 6]
        aw = t[i, 7]
        m = _mask(w)
        if op == F:
            vals[dst] = fv[a] & m
        elif op == PC:
            vals[dst] = pc & m
        elif op == RR:
            vals[dst] = rf[aux, vals[a] if a >= 0 else 0]
        elif op == RM:
            vals[dst] = <uint64_t>mem_read(vals[a], aux)
        elif op == NOT:
            vals[dst] = ~vals[a] & m
        elif op == NEG:
            vals[dst] = (<uint64_t>0 - vals[a]) & m
        elif op <= SMULL:
            vals[dst] = _binop(op, vals[a], vals[b], aw) & m
        elif op == SEXT:
            vals[dst] = (<uint64_t>_sx(vals[a], aw)) & m
        elif op == ZEXT or op == TRUNC:
            vals[dst] = vals[a] & m
        elif op == SLICE:
            vals[dst] = (vals[a] >> aux) & m
        elif op == CAT:
            vals[dst] = (vals[a] << aux) | vals[b]
        elif op == SEL:
            vals[dst] = vals[b] if vals[a] else vals[c]
        else:
            if c >= 0 and not vals[c]:
                continue
            if op == WR:
                out.append((0, aux, vals[a] if a >= 0 else 0, vals[b]))
            elif op == WM:
                out.append((1, aux, vals[a], vals[b]))
            else:
                out.append((2, 0, 0, vals[b]))
    return out
