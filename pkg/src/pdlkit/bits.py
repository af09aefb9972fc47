"""Fixed-width two's-complement helpers on Python ints."""
from __future__ import annotations


def mask(w: int) -> int:
    return (1 << w) - 1


def trunc(v: int, w: int) -> int:
    return v & ((1 << w) - 1)


def sext(v: int, w: int) -> int:
    """Interpret the low w bits of v as signed."""
    v &= (1 << w) - 1
    return v - (1 << w) if w and v >> (w - 1) else v


def to_signed(v: int, w: int) -> int:
    return sext(v, w)


def popcount(v: int) -> int:
    return bin(v).count("1")


# Binary operators on w-bit patterns.  Division follows the RISC-V
# convention for a zero divisor so every operator stays total.
def apply_op(op: str, a: int, b: int, w: int) -> int:
    m = (1 << w) - 1
    if op == "add":
        return (a + b) & m
    if op == "sub":
        return (a - b) & m
    if op == "mul":
        return (a * b) & m
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return (a << b) & m if b < w else 0
    if op == "lshr":
        return a >> b if b < w else 0
    if op == "ashr":
        return (sext(a, w) >> min(b, w)) & m
    if op == "eq":
        return int(a == b)
    if op == "ne":
        return int(a != b)
    if op == "ult":
        return int(a < b)
    if op == "ule":
        return int(a <= b)
    if op == "slt":
        return int(sext(a, w) < sext(b, w))
    if op == "sle":
        return int(sext(a, w) <= sext(b, w))
    if op == "udiv":
        return m if b == 0 else a // b
    if op == "urem":
        return a if b == 0 else a % b
    if op == "sdiv":
        sa, sb = sext(a, w), sext(b, w)
        if sb == 0:
            return m
        q = abs(sa) // abs(sb)
        return (q if (sa < 0) == (sb < 0) else -q) & m
    if op == "srem":
        sa, sb = sext(a, w), sext(b, w)
        if sb == 0:
            return a
        r = abs(sa) % abs(sb)
        return (r if sa >= 0 else -r) & m
    if op == "umull":
        return a * b  # double width, operands already w bits
    if op == "smull":
        return (sext(a, w) * sext(b, w)) & ((1 << (2 * w)) - 1)
    raise ValueError(op)


COMMUTATIVE = frozenset({"add", "mul", "and", "or", "xor", "eq", "ne", "umull", "smull"})
COMPARE = frozenset({"eq", "ne", "ult", "ule", "slt", "sle"})
