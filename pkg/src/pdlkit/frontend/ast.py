"""Raw syntax tree produced by the parser.

Spans never take part in equality so two parses of the same text compare
equal regardless of where definitions came from.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..errors import Span


@dataclass
class Node:
    span: Span | None = field(default=None, compare=False, repr=False, kw_only=True)


# -- types -----------------------------------------------------------------
@dataclass
class TypeRef(Node):
    name: str
    width: "Expr | None" = None


# -- expressions -----------------------------------------------------------
class Expr(Node):
    pass


class Stmt(Node):
    pass


@dataclass
class Lit(Expr):
    value: int
    width: int | None = None  # digit width for binary/hex literals


@dataclass
class BoolLit(Expr):
    value: bool


@dataclass
class StrLit(Expr):
    value: str


@dataclass
class Name(Expr):
    id: str


@dataclass
class EnumRef(Expr):
    enum: str
    member: str


@dataclass
class Call(Expr):
    target: str
    args: list
    size: "Expr | None" = None  # MEM<4>(addr)


@dataclass
class Slice(Expr):
    expr: Expr
    hi: Expr
    lo: Expr


@dataclass
class Index(Expr):
    """`e(i)` applied to a non-name target (bit select)."""
    expr: Expr
    index: Expr


@dataclass
class Binary(Expr):
    op: str
    a: Expr
    b: Expr


@dataclass
class Unary(Expr):
    op: str
    a: Expr


@dataclass
class Cast(Expr):
    expr: Expr
    type: TypeRef


@dataclass
class Tuple(Expr):
    items: list


@dataclass
class IfExpr(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass
class LetExpr(Expr):
    name: str
    value: Expr
    body: Expr


@dataclass
class MatchExpr(Expr):
    scrutinee: Expr
    cases: list  # (pattern Expr | None for `_`, Expr)


@dataclass
class Instantiation(Node):
    """`$model(arg ; arg)` before expansion. Args are raw token lists."""
    model: str
    args: list
    kind: str  # "defs" | "expr" | "stat" | "encs"


class ExprInst(Instantiation, Expr):
    pass


class StatInst(Instantiation, Stmt):
    pass


# -- statements ------------------------------------------------------------


@dataclass
class Block(Stmt):
    stmts: list


@dataclass
class Assign(Stmt):
    target: Expr
    value: Expr


@dataclass
class IfStmt(Stmt):
    cond: Expr
    then: Stmt
    other: Stmt | None = None


@dataclass
class LetStmt(Stmt):
    name: str
    value: Expr
    body: Stmt


@dataclass
class MatchStmt(Stmt):
    scrutinee: Expr
    cases: list  # (pattern | None, Stmt)


@dataclass
class RaiseStmt(Stmt):
    what: str


@dataclass
class ForallStmt(Stmt):
    pass


# -- definitions -----------------------------------------------------------
@dataclass
class Annotation(Node):
    tokens: list = field(compare=False)
    text: str = ""


@dataclass
class Def(Node):
    annotations: list = field(default_factory=list, kw_only=True)


@dataclass
class ImportDef(Def):
    path: str


@dataclass
class ConstantDef(Def):
    name: str
    type: TypeRef | None
    value: Expr


@dataclass
class UsingDef(Def):
    name: str
    type: TypeRef


@dataclass
class FieldDef(Node):
    name: str
    ranges: list | None = None  # list of (hi Expr, lo Expr)
    type: TypeRef | None = None


@dataclass
class AccessDef(Node):
    name: str
    expr: Expr


@dataclass
class PredicateDef(Node):
    name: str
    clauses: list  # (Expr, message str | None)


@dataclass
class EncodingFnDef(Node):
    name: str
    assigns: list  # (field name, Expr)


@dataclass
class FormatDef(Def):
    name: str
    type: TypeRef
    fields: list
    accessors: list
    predicates: list
    encodings: list


@dataclass
class RegisterFileDef(Def):
    name: str
    index_type: TypeRef
    elem_type: TypeRef


@dataclass
class RegisterDef(Def):
    name: str
    type: TypeRef


@dataclass
class PcDef(Def):
    name: str
    type: TypeRef


@dataclass
class MemoryDef(Def):
    name: str
    addr_type: TypeRef
    unit_type: TypeRef


@dataclass
class EnumDef(Def):
    name: str
    type: TypeRef | None
    members: list  # (name, Expr | None)


@dataclass
class FunctionDef(Def):
    name: str
    params: list  # (name, TypeRef)
    ret: TypeRef
    body: Expr


@dataclass
class ModelDef(Def):
    name: str
    params: list  # (name, syntax type)
    result: str
    body: list = field(compare=False)  # raw tokens
    body_text: str = ""


@dataclass
class InstructionDef(Def):
    name: str
    format: str
    body: Stmt


@dataclass
class EncodingDef(Def):
    name: str
    entries: list  # (field, Expr) or Instantiation


@dataclass
class AssemblyDef(Def):
    names: list
    expr: Expr


@dataclass
class DefsInst(Instantiation, Def):
    pass


@dataclass
class IsaDef(Def):
    name: str
    extends: str | None
    defs: list


# -- micro architecture ------------------------------------------------------
@dataclass
class MFetchNext(Node):
    pass


@dataclass
class MDecode(Node):
    arg: Node


@dataclass
class MRef(Node):
    """`name` or `name.member`."""
    name: str
    member: str | None = None


@dataclass
class MAssign(Node):
    target: str
    value: Node


@dataclass
class MLet(Node):
    name: str
    value: Node
    body: list


@dataclass
class MIf(Node):
    cond: Node
    then: list
    other: list


@dataclass
class MCall(Node):
    var: str
    method: str
    args: list  # resource names (without @)


@dataclass
class MRaise(Node):
    what: str


@dataclass
class StageDef(Def):
    name: str
    outputs: list  # (name, type name)
    body: list


@dataclass
class LogicDef(Def):
    name: str


@dataclass
class MiaDef(Def):
    name: str
    isa: str
    stages: list
    logics: list


@dataclass
class ProcessorDef(Def):
    name: str
    isa: str
    items: list  # (key, Expr)


@dataclass
class SpecAst(Node):
    definitions: list

    def walk_defs(self):
        for d in self.definitions:
            yield d
            if isinstance(d, IsaDef):
                yield from d.defs

    def count(self, cls) -> int:
        return sum(1 for d in self.walk_defs() if isinstance(d, cls))


def replace(node, **kw):
    new = dataclasses.replace(node, **kw)
    new.span = node.span
    return new
