"""Elaborated processor-description model and its typed expression language."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import Span


@dataclass(frozen=True)
class Ty:
    kind: str  # bits | sint | uint | bool
    width: int

    @property
    def signed(self) -> bool:
        return self.kind == "sint"

    def __str__(self):
        if self.kind == "bool":
            return "Bool"
        return {"bits": "Bits", "sint": "SInt", "uint": "UInt"}[self.kind] + f"<{self.width}>"


BOOL = Ty("bool", 1)


def bits(w: int) -> Ty:
    return Ty("bits", w)


# -- typed expressions -----------------------------------------------------
# Identity matters: a let-bound expression is one shared object.
class TExpr:
    __slots__ = ("ty",)

    def children(self):
        return ()


class TConst(TExpr):
    __slots__ = ("value",)

    def __init__(self, value: int, ty: Ty | None):
        self.value, self.ty = value, ty

    def __repr__(self):
        return f"{self.value}:{self.ty}"


class TField(TExpr):
    __slots__ = ("name",)

    def __init__(self, name, ty):
        self.name, self.ty = name, ty

    def __repr__(self):
        return self.name


class TParam(TExpr):
    """Logical value of an access function inside predicate/encoding bodies."""
    __slots__ = ("name",)

    def __init__(self, name, ty):
        self.name, self.ty = name, ty

    def __repr__(self):
        return f"${self.name}"


class TPc(TExpr):
    __slots__ = ("offset",)

    def __init__(self, ty, offset=0):
        self.ty, self.offset = ty, offset

    def __repr__(self):
        return "PC" if not self.offset else f"PC+{self.offset}"


class TReadReg(TExpr):
    __slots__ = ("res", "index")

    def __init__(self, res, index, ty):
        self.res, self.index, self.ty = res, index, ty

    def children(self):
        return (self.index,) if self.index is not None else ()

    def __repr__(self):
        return f"{self.res}({self.index})" if self.index is not None else self.res


class TReadMem(TExpr):
    __slots__ = ("res", "n", "addr")

    def __init__(self, res, n, addr, ty):
        self.res, self.n, self.addr, self.ty = res, n, addr, ty

    def children(self):
        return (self.addr,)

    def __repr__(self):
        return f"{self.res}<{self.n}>({self.addr})"


class TOp(TExpr):
    __slots__ = ("op", "args")

    def __init__(self, op, args, ty):
        self.op, self.args, self.ty = op, tuple(args), ty

    def children(self):
        return self.args

    def __repr__(self):
        return f"{self.op}({', '.join(map(repr, self.args))})"


class TCast(TExpr):
    __slots__ = ("kind", "a")

    def __init__(self, kind, a, ty):
        self.kind, self.a, self.ty = kind, a, ty

    def children(self):
        return (self.a,)

    def __repr__(self):
        return f"{self.kind}<{self.ty.width}>({self.a!r})"


class TSlice(TExpr):
    __slots__ = ("a", "hi", "lo")

    def __init__(self, a, hi, lo, ty):
        self.a, self.hi, self.lo, self.ty = a, hi, lo, ty

    def children(self):
        return (self.a,)

    def __repr__(self):
        return f"{self.a!r}({self.hi}..{self.lo})"


class TConcat(TExpr):
    __slots__ = ("parts",)

    def __init__(self, parts, ty):
        self.parts, self.ty = tuple(parts), ty

    def children(self):
        return self.parts

    def __repr__(self):
        return f"({', '.join(map(repr, self.parts))})"


class TSelect(TExpr):
    __slots__ = ("c", "a", "b")

    def __init__(self, c, a, b, ty):
        self.c, self.a, self.b, self.ty = c, a, b, ty

    def children(self):
        return (self.c, self.a, self.b)

    def __repr__(self):
        return f"select({self.c!r}, {self.a!r}, {self.b!r})"


class TVar(TExpr):
    """Reference to a let-bound value; transparent for evaluation."""
    __slots__ = ("name", "value")

    def __init__(self, name, value):
        self.name, self.value, self.ty = name, value, value.ty

    def children(self):
        return (self.value,)

    def __repr__(self):
        return self.name


# -- typed statements ------------------------------------------------------
@dataclass(eq=False)
class SWrite:
    kind: str  # reg | mem | pc
    res: str
    index: TExpr | None  # register index or memory address
    n: int  # memory units (1 for registers)
    value: TExpr
    span: Span | None = None


@dataclass(eq=False)
class SIf:
    cond: TExpr
    then: list
    other: list
    span: Span | None = None


@dataclass(eq=False)
class SLet:
    """Marks where a let binding was evaluated (for read-order checks)."""
    name: str
    value: TExpr
    span: Span | None = None


# -- assembly expressions ----------------------------------------------------
@dataclass(eq=False)
class AStr:
    text: str


@dataclass(eq=False)
class AMnemonic:
    pass


@dataclass(eq=False)
class ARegister:
    field: str
    file: str
    prefix: str


@dataclass(eq=False)
class ANumber:
    base: str  # decimal | hex
    expr: TExpr
    operand: str | None  # field or access function name when directly invertible


@dataclass(eq=False)
class AConcat:
    items: list


@dataclass(eq=False)
class AIf:
    cond: TExpr
    then: object
    other: object


@dataclass(eq=False)
class AMatch:
    scrutinee: TExpr
    cases: list  # (value int, node)
    default: object


# -- resources ----------------------------------------------------------------
@dataclass
class PcSpec:
    name: str
    width: int
    semantics: str = "current"  # current | next | next-next


@dataclass
class RegFile:
    name: str
    index_width: int
    elem_width: int
    zero: frozenset = frozenset()

    @property
    def size(self) -> int:
        return 1 << self.index_width


@dataclass
class Register:
    name: str
    width: int


@dataclass
class Memory:
    name: str
    addr_width: int
    unit_width: int
    endian: str = "little"


# -- formats and instructions -------------------------------------------------
@dataclass
class FieldSpec:
    name: str
    ranges: list  # [(hi, lo)] most significant first
    width: int

    def extract(self, word: int) -> int:
        v = 0
        for hi, lo in self.ranges:
            n = hi - lo + 1
            v = (v << n) | ((word >> lo) & ((1 << n) - 1))
        return v

    def insert(self, word: int, value: int) -> int:
        shift = self.width
        for hi, lo in self.ranges:
            n = hi - lo + 1
            shift -= n
            part = (value >> shift) & ((1 << n) - 1)
            word = (word & ~(((1 << n) - 1) << lo)) | (part << lo)
        return word

    def mask(self) -> int:
        m = 0
        for hi, lo in self.ranges:
            m |= ((1 << (hi - lo + 1)) - 1) << lo
        return m


@dataclass
class Accessor:
    name: str
    expr: TExpr
    ty: Ty
    predicate: list = field(default_factory=list)  # (TExpr bool over TParam, description)
    encoding: dict = field(default_factory=dict)  # field -> TExpr over TParam
    trivial: str | None = None  # field name when a pure extension of one field


@dataclass
class Format:
    name: str
    width: int
    fields: dict  # name -> FieldSpec, declaration order
    accessors: dict  # name -> Accessor
    span: Span | None = None


@dataclass
class Instruction:
    name: str
    format: Format
    body: list  # typed statements
    encoding: dict  # field -> (value, span)
    assembly: object = None  # assembly node
    tags: frozenset = frozenset()
    span: Span | None = None
    index: int = 0


# -- micro architecture -------------------------------------------------------
@dataclass
class Mapping:
    kind: str  # read | readOrForward | compute | verify | write | check-invalid
    resource: str | None = None
    logic: str | None = None
    span: Span | None = None

    def __str__(self):
        if self.kind == "readOrForward":
            return f"readOrForward(@{self.resource}, @{self.logic})"
        if self.resource:
            return f"{self.kind}(@{self.resource})"
        return self.kind


@dataclass
class MiaStage:
    name: str
    outputs: list
    mappings: list
    fetch: bool = False
    decode: bool = False
    span: Span | None = None


@dataclass
class MiaSpec:
    name: str
    isa: str
    stages: list  # MiaStage in dependency order
    logics: dict  # name -> kind
    annotations: dict
    span: Span | None = None

    def stage_index(self, name) -> int:
        for i, s in enumerate(self.stages):
            if s.name == name:
                return i
        raise KeyError(name)


@dataclass
class Processor:
    name: str
    isa: str
    start: int | None
    stop: tuple | None  # (resource, value)


@dataclass
class SpecModel:
    name: str
    constants: dict
    aliases: dict
    pc: PcSpec | None
    regfiles: dict
    registers: dict
    memory: Memory | None
    enums: dict
    functions: dict
    formats: dict
    instructions: dict  # name -> Instruction, source order
    mias: dict
    processor: Processor | None
    annotations: dict = field(default_factory=dict)

    @property
    def mia(self) -> MiaSpec | None:
        return next(iter(self.mias.values()), None)

    @property
    def instr_width(self) -> int:
        widths = {i.format.width for i in self.instructions.values()}
        return widths.pop() if len(widths) == 1 else 0

    def instr_list(self) -> list:
        return list(self.instructions.values())
