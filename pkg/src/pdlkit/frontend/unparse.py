"""Render raw expressions back to source-like text (diagnostics only)."""
from __future__ import annotations

from . import ast as A


def expr_text(e) -> str:
    if isinstance(e, A.Lit):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.StrLit):
        return repr(e.value)
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.EnumRef):
        return f"{e.enum}::{e.member}"
    if isinstance(e, A.Call):
        size = f"<{expr_text(e.size)}>" if e.size is not None else ""
        return f"{e.target}{size}({', '.join(expr_text(a) for a in e.args)})"
    if isinstance(e, A.Slice):
        return f"{expr_text(e.expr)}({expr_text(e.hi)}..{expr_text(e.lo)})"
    if isinstance(e, A.Index):
        return f"{expr_text(e.expr)}({expr_text(e.index)})"
    if isinstance(e, A.Binary):
        return f"{expr_text(e.a)} {e.op} {expr_text(e.b)}"
    if isinstance(e, A.Unary):
        return f"{e.op}{expr_text(e.a)}"
    if isinstance(e, A.Cast):
        w = f"<{expr_text(e.type.width)}>" if e.type.width is not None else ""
        return f"{expr_text(e.expr)} as {e.type.name}{w}"
    if isinstance(e, A.Tuple):
        return "(" + ", ".join(expr_text(x) for x in e.items) + ")"
    if isinstance(e, A.IfExpr):
        return f"if {expr_text(e.cond)} then {expr_text(e.then)} else {expr_text(e.other)}"
    return type(e).__name__


def stmt_lines(stmts, indent="") -> list:
    """Typed statements, one per line, for the `expand` listing."""
    from . import model as M
    out = []
    for s in stmts:
        if isinstance(s, M.SLet):
            out.append(f"{indent}let {s.name} = {s.value.value!r}" if isinstance(s.value, M.TVar)
                       else f"{indent}let {s.name} = {s.value!r}")
        elif isinstance(s, M.SWrite):
            if s.kind == "reg":
                tgt = f"{s.res}({s.index!r})" if s.index is not None else s.res
            elif s.kind == "mem":
                tgt = f"{s.res}<{s.n}>({s.index!r})"
            else:
                tgt = s.res
            out.append(f"{indent}{tgt} := {s.value!r}")
        elif isinstance(s, M.SIf):
            out.append(f"{indent}if {s.cond!r} then")
            out.extend(stmt_lines(s.then, indent + "  "))
            if s.other:
                out.append(f"{indent}else")
                out.extend(stmt_lines(s.other, indent + "  "))
    return out
