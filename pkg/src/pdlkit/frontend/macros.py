"""Syntactic model (macro) expansion.

Models are stored as raw token bodies.  An instantiation substitutes the
argument tokens for `$param` holes and re-parses the result as the model's
result category, so substitution stays purely syntactic.
"""
from __future__ import annotations

import dataclasses

from ..errors import MacroTypeError, SpecSyntaxError, UnknownModel
from . import ast as A
from .lexer import IDENT, INT, PUNCT, Token
from .parser import parse_tokens

# which result categories may stand in each instantiation position
POSITION_OK = {
    "defs": {"IsaDefs"},
    "expr": {"Ex", "Id", "Bin", "CallEx"},
    "stat": {"Stat"},
    "encs": {"Encs"},
}


def _dummy(kind: str, name: str, like: Token) -> list[Token]:
    sp = like.span
    if kind == "Id":
        return [Token(IDENT, f"__{name}", sp, f"__{name}")]
    if kind == "Ex":
        return [Token(PUNCT, "(", sp), Token(INT, "0", sp, 0), Token(PUNCT, ")", sp)]
    if kind == "Bin":
        return [Token(INT, "0b0", sp, 0, 1)]
    if kind == "BinOp":
        return [Token(PUNCT, "+", sp)]
    if kind == "Stat":
        return [Token(PUNCT, "{", sp), Token(PUNCT, "}", sp)]
    if kind == "CallEx":
        return [Token(IDENT, f"__{name}", sp, f"__{name}"), Token(PUNCT, "(", sp),
                Token(INT, "0", sp, 0), Token(PUNCT, ")", sp)]
    if kind == "Encs":
        return [Token(IDENT, f"__{name}", sp, f"__{name}"), Token(PUNCT, "=", sp), Token(INT, "0", sp, 0)]
    return []  # IsaDefs


def substitute(body: list[Token], params: list, args: dict) -> list[Token]:
    kinds = dict(params)
    out = []
    i = 0
    while i < len(body):
        t = body[i]
        if t.kind == PUNCT and t.text == "$" and i + 1 < len(body) and body[i + 1].text in kinds:
            name = body[i + 1].text
            toks = args[name]
            if kinds[name] == "Ex":
                sp = t.span
                toks = [Token(PUNCT, "(", sp)] + list(toks) + [Token(PUNCT, ")", sp)]
            out.extend(toks)
            i += 2
            continue
        out.append(t)
        i += 1
    return out


class Expander:
    def __init__(self):
        self.models: dict[str, tuple[int, A.ModelDef]] = {}
        self.stack: list[str] = []

    def register(self, m: A.ModelDef):
        # use-site category check: every hole must parse with a dummy of its declared type
        dummies = {p: _dummy(k, p, m.body[0] if m.body else Token(PUNCT, "", m.span)) for p, k in m.params}
        try:
            parse_tokens(substitute(m.body, m.params, dummies), m.result)
        except SpecSyntaxError as e:
            raise MacroTypeError(
                f"model {m.name}: body does not form a {m.result} with its declared parameter types ({e.message})",
                e.span or m.span) from None
        self.models[m.name] = (len(self.models), m)

    def expand_inst(self, inst: A.Instantiation, limit: int | None = None):
        if inst.model not in self.models:
            raise UnknownModel(f"unknown model '{inst.model}'", inst.span)
        idx, m = self.models[inst.model]
        if limit is not None and idx >= limit:
            raise UnknownModel(f"model '{inst.model}' is not defined before use", inst.span)
        if m.result not in POSITION_OK[inst.kind]:
            raise MacroTypeError(f"model {m.name} yields {m.result}, not usable here", inst.span)
        if len(inst.args) != len(m.params):
            raise MacroTypeError(
                f"model {m.name} expects {len(m.params)} arguments, got {len(inst.args)}", inst.span)
        args = {}
        for (pname, kind), toks in zip(m.params, inst.args):
            if not toks:
                raise MacroTypeError(f"empty argument for parameter {pname} of {m.name}", inst.span)
            try:
                parse_tokens(toks, kind)
            except SpecSyntaxError:
                raise MacroTypeError(
                    f"argument for parameter {pname} of {m.name} is not of syntax type {kind}",
                    toks[0].span) from None
            args[pname] = toks
        toks = substitute(m.body, m.params, args)
        try:
            tree = parse_tokens(toks, m.result)
        except SpecSyntaxError as e:
            raise MacroTypeError(f"expansion of {m.name} is malformed: {e.message}", e.span) from None
        if m.result == "Id":
            tree = A.Name(tree, span=inst.span)
        # nested instantiations may only use models defined before this one
        return self.walk(tree, idx)

    def walk(self, node, limit=None):
        if isinstance(node, list):
            out = []
            for x in node:
                if isinstance(x, A.Instantiation) and x.kind in ("defs", "encs"):
                    r = self.expand_inst(x, limit)
                    if isinstance(x, A.DefsInst) and x.annotations and r:
                        r[0].annotations = x.annotations + r[0].annotations
                    out.extend(r)
                elif isinstance(x, A.ModelDef):
                    continue
                else:
                    out.append(self.walk(x, limit))
            return out
        if isinstance(node, tuple):
            return tuple(self.walk(x, limit) for x in node)
        if isinstance(node, A.Instantiation):
            r = self.expand_inst(node, limit)
            if isinstance(r, list):  # a Stat model producing several statements
                return A.Block(r, span=node.span)
            return r
        if isinstance(node, A.Node) and dataclasses.is_dataclass(node):
            changes = {}
            for f in dataclasses.fields(node):
                if f.name in ("span", "annotations") or not f.compare:
                    continue
                v = getattr(node, f.name)
                nv = self.walk(v, limit)
                if nv is not v:
                    changes[f.name] = nv
            if changes:
                new = dataclasses.replace(node, **changes)
                new.span = node.span
                if hasattr(node, "annotations"):
                    new.annotations = node.annotations
                return new
        return node


def expand_macros(ast: A.SpecAst) -> A.SpecAst:
    """Expand every model instantiation; model definitions are dropped."""
    out = []
    for d in ast.definitions:
        if isinstance(d, A.IsaDef):
            ex = Expander()
            defs = []
            for x in d.defs:
                if isinstance(x, A.ModelDef):
                    ex.register(x)
                    continue
                if isinstance(x, A.DefsInst):
                    r = ex.expand_inst(x)
                    if x.annotations and r:
                        r[0].annotations = x.annotations + r[0].annotations
                    defs.extend(r)
                    continue
                defs.append(ex.walk(x))
            nd = A.replace(d, defs=defs)
            nd.annotations = d.annotations
            out.append(nd)
        else:
            out.append(d)
    return A.SpecAst(out, span=ast.span)
