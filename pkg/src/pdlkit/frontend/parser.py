"""Recursive-descent parser for .pdl descriptions."""
from __future__ import annotations

from ..errors import NOSPAN, SpecSyntaxError, UnsupportedFeature
from . import ast as A
from .lexer import EOF, IDENT, INT, PUNCT, STRING, Token, tokenize

BINARY_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "=": 6, "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}
SYNTAX_TYPES = ("Id", "Ex", "Stat", "BinOp", "Bin", "IsaDefs", "Encs", "CallEx")

# keywords that start a construct we deliberately do not support
UNSUPPORTED_DEFS = {
    "exception": "exception", "forall": "forall", "cache": "cache",
    "alias": "alias register", "application": "application binary interface",
    "assembly description": "assembly description", "process": "process",
    "relocation": "relocation", "record": "record",
}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- cursor helpers ---------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, k=0) -> bool:
        t = self.peek(k) if k else self.tok
        return t.kind in (PUNCT, IDENT) and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != EOF:
            self.i += 1
        return t

    def accept(self, text) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> str:
        if self.tok.kind != IDENT:
            self.error("expected identifier")
        return self.advance().text

    def error(self, msg):
        t = self.tok
        found = "end of input" if t.kind == EOF else repr(t.text)
        raise SpecSyntaxError(f"{msg}, found {found}", t.span)

    def at_end(self) -> bool:
        return self.tok.kind == EOF

    # -- top level --------------------------------------------------------
    def parse_file(self) -> A.SpecAst:
        defs = []
        span = self.tok.span
        while not self.at_end():
            anns = self.annotations()
            start = self.tok
            if self.accept("import"):
                if self.tok.kind != STRING:
                    self.error("expected import path string")
                d = A.ImportDef(self.advance().value)
            elif self.at("instruction") and self.at("set", 1):
                d = self.isa()
            elif self.at("micro") and self.at("architecture", 1):
                d = self.mia()
            elif self.at("micro") and self.at("processor", 1):
                d = self.processor()
            elif self.tok.text in ("constant", "using", "function", "enumeration"):
                d = self.isa_def()  # shared by every ISA in the file
            else:
                self.unsupported_or_error("expected a top-level definition")
            d.span = start.span
            d.annotations = anns
            defs.append(d)
        return A.SpecAst(defs, span=span)

    def unsupported_or_error(self, msg):
        t = self.tok.text
        if t in UNSUPPORTED_DEFS:
            raise UnsupportedFeature(f"unsupported construct '{UNSUPPORTED_DEFS[t]}'", self.tok.span)
        if t == "assembly" and self.at("description", 1):
            raise UnsupportedFeature("unsupported construct 'assembly description'", self.tok.span)
        if t in ("application", "user", "abi"):
            raise UnsupportedFeature(f"unsupported construct '{t}'", self.tok.span)
        self.error(msg)

    def annotations(self) -> list:
        anns = []
        while self.at("["):
            start = self.advance()
            toks = []
            depth = 0
            while not (depth == 0 and self.at("]")):
                if self.at_end():
                    self.error("unterminated annotation")
                if self.at("["):
                    depth += 1
                elif self.at("]"):
                    depth -= 1
                toks.append(self.advance())
            self.expect("]")
            anns.append(A.Annotation(toks, " ".join(t.text for t in toks), span=start.span))
        return anns

    def isa(self) -> A.IsaDef:
        self.expect("instruction"); self.expect("set"); self.expect("architecture")
        name = self.ident()
        extends = None
        if self.accept("extending"):
            extends = self.ident()
        self.expect("=")
        self.expect("{")
        defs = self.isa_defs(lambda: self.at("}"))
        self.expect("}")
        return A.IsaDef(name, extends, defs)

    def isa_defs(self, stop) -> list:
        defs = []
        while not stop():
            if self.at_end():
                self.error("expected '}'")
            anns = self.annotations()
            start = self.tok
            d = self.isa_def()
            d.span = start.span
            d.annotations = anns
            defs.append(d)
        return defs

    def isa_def(self) -> A.Def:
        t = self.tok
        if self.at("$"):
            inst = self.instantiation("defs")
            return A.DefsInst(inst.model, inst.args, "defs")
        kw = t.text if t.kind == IDENT else None
        if kw == "constant":
            self.advance()
            name = self.ident()
            ty = self.type_ref() if self.accept(":") else None
            self.expect("=")
            return A.ConstantDef(name, ty, self.expr())
        if kw == "using":
            self.advance()
            name = self.ident()
            self.expect("=")
            return A.UsingDef(name, self.type_ref())
        if kw == "format":
            return self.format_def()
        if kw == "register":
            self.advance()
            if self.accept("file"):
                name = self.ident()
                self.expect(":")
                it = self.type_ref()
                self.expect("->")
                return A.RegisterFileDef(name, it, self.type_ref())
            name = self.ident()
            self.expect(":")
            return A.RegisterDef(name, self.type_ref())
        if kw == "program":
            self.advance()
            self.expect("counter")
            name = self.ident()
            self.expect(":")
            return A.PcDef(name, self.type_ref())
        if kw == "memory":
            self.advance()
            name = self.ident()
            self.expect(":")
            at = self.type_ref()
            self.expect("->")
            return A.MemoryDef(name, at, self.type_ref())
        if kw == "enumeration":
            return self.enum_def()
        if kw == "function":
            return self.function_def()
        if kw == "model":
            return self.model_def()
        if kw == "instruction":
            self.advance()
            name = self.name_tok()
            self.expect(":")
            fmt = self.name_tok()
            self.expect("=")
            return A.InstructionDef(name, fmt, self.stmt())
        if kw == "encoding":
            self.advance()
            name = self.name_tok()
            self.expect("=")
            return A.EncodingDef(name, self.encoding_entries())
        if kw == "assembly":
            if self.at("description", 1):
                self.unsupported_or_error("")
            self.advance()
            names = [self.name_tok()]
            while self.accept(","):
                names.append(self.name_tok())
            self.expect("=")
            return A.AssemblyDef(names, self.expr())
        self.unsupported_or_error("expected a definition")

    def name_tok(self) -> str:
        return self.ident()

    def format_def(self) -> A.FormatDef:
        self.expect("format")
        name = self.ident()
        self.expect(":")
        ty = self.type_ref()
        fields, accs, preds, encs = [], [], [], []
        if self.accept("="):
            self.expect("{")
            while True:
                start = self.tok
                if self.at("predicate") and self.peek().kind == IDENT and self.at("=", 2):
                    self.advance()
                    pname = self.ident()
                    self.expect("=")
                    preds.append(A.PredicateDef(pname, self.predicate_clauses(), span=start.span))
                elif self.at("encoding") and self.peek().kind == IDENT and self.at("=", 2):
                    self.advance()
                    ename = self.ident()
                    self.expect("=")
                    self.expect("{")
                    assigns = []
                    while True:
                        f = self.ident()
                        self.expect("=")
                        assigns.append((f, self.expr()))
                        if not self.accept(","):
                            break
                    self.expect("}")
                    encs.append(A.EncodingFnDef(ename, assigns, span=start.span))
                else:
                    fname = self.ident()
                    if self.accept("["):
                        ranges = []
                        while True:
                            hi = self.expr()
                            lo = self.expr() if self.accept("..") else hi
                            ranges.append((hi, lo))
                            if not self.accept(","):
                                break
                        self.expect("]")
                        fields.append(A.FieldDef(fname, ranges, None, span=start.span))
                    elif self.accept(":"):
                        fields.append(A.FieldDef(fname, None, self.type_ref(), span=start.span))
                    elif self.accept("="):
                        accs.append(A.AccessDef(fname, self.expr(), span=start.span))
                    else:
                        self.error("expected '[', ':' or '=' in format item")
                if not self.accept(","):
                    break
            self.expect("}")
        return A.FormatDef(name, ty, fields, accs, preds, encs)

    def predicate_clauses(self) -> list:
        def clause():
            e = self.expr()
            msg = None
            if self.accept(":"):
                if self.tok.kind != STRING:
                    self.error("expected predicate description string")
                msg = self.advance().value
            return (e, msg)

        if self.accept("{"):
            out = [clause()]
            while self.accept(","):
                out.append(clause())
            self.expect("}")
            return out
        return [clause()]

    def enum_def(self) -> A.EnumDef:
        self.expect("enumeration")
        name = self.ident()
        ty = self.type_ref() if self.accept(":") else None
        self.expect("=")
        self.expect("{")
        members = []
        while not self.at("}"):
            m = self.ident()
            v = self.expr() if self.accept("=") else None
            members.append((m, v))
            if not self.accept(","):
                break
        self.expect("}")
        return A.EnumDef(name, ty, members)

    def function_def(self) -> A.FunctionDef:
        self.expect("function")
        name = self.ident()
        params = []
        if self.accept("("):
            while not self.at(")"):
                p = self.ident()
                self.expect(":")
                params.append((p, self.type_ref()))
                if not self.accept(","):
                    break
            self.expect(")")
        if not (self.accept("->") or self.accept(":")):
            self.error("expected '->' and a result type")
        ret = self.type_ref()
        self.expect("=")
        return A.FunctionDef(name, params, ret, self.expr())

    def model_def(self) -> A.ModelDef:
        self.expect("model")
        name = self.ident()
        self.expect("(")
        params = []
        while not self.at(")"):
            p = self.ident()
            self.expect(":")
            st = self.ident()
            if st not in SYNTAX_TYPES:
                self.error(f"unknown syntax type {st!r}")
            params.append((p, st))
            if not self.accept(","):
                break
        self.expect(")")
        self.expect(":")
        result = self.ident()
        if result not in SYNTAX_TYPES:
            self.error(f"unknown syntax type {result!r}")
        self.expect("=")
        self.expect("{")
        body = self.balanced("}")
        self.expect("}")
        return A.ModelDef(name, params, result, body, " ".join(t.text for t in body))

    def balanced(self, closer) -> list:
        """Collect raw tokens up to (not including) the matching closer."""
        pairs = {"(": ")", "{": "}", "[": "]"}
        stack = []
        out = []
        while True:
            t = self.tok
            if t.kind == EOF:
                self.error(f"expected {closer!r}")
            if t.kind == PUNCT:
                if not stack and t.text == closer:
                    return out
                if not stack and closer == ")" and t.text == ";":
                    return out
                if t.text in pairs:
                    stack.append(pairs[t.text])
                elif stack and t.text == stack[-1]:
                    stack.pop()
                elif t.text in (")", "}", "]"):
                    self.error("unbalanced bracket")
            out.append(self.advance())

    def instantiation(self, kind) -> A.Instantiation:
        start = self.expect("$")
        model = self.ident()
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.balanced(")"))
                if not self.accept(";"):
                    break
        self.expect(")")
        cls = {"expr": A.ExprInst, "stat": A.StatInst, "defs": A.DefsInst}.get(kind, A.Instantiation)
        return cls(model, args, kind, span=start.span)

    def encoding_entries(self) -> list:
        self.expect("{")
        entries = self.encs_list(lambda: self.at("}"))
        self.expect("}")
        return entries

    def encs_list(self, stop) -> list:
        entries = []
        while not stop():
            if self.at("$"):
                entries.append(self.instantiation("encs"))
            else:
                start = self.tok
                f = self.ident()
                self.expect("=")
                e = self.expr()
                e.span = e.span or start.span
                entries.append((f, e))
            if not self.accept(","):
                break
        return entries

    # -- types ------------------------------------------------------------
    def type_ref(self) -> A.TypeRef:
        start = self.tok
        name = self.ident()
        width = None
        if self.accept("<"):
            width = self.binary(8)
            self.expect(">")
        return A.TypeRef(name, width, span=start.span)

    # -- statements -------------------------------------------------------
    def stmt(self) -> A.Stmt:
        start = self.tok
        s = self._stmt()
        if s.span is None:
            s.span = start.span
        return s

    def _stmt(self) -> A.Stmt:
        if self.accept("{"):
            stmts = []
            while not self.at("}"):
                if self.at_end():
                    self.error("expected '}'")
                stmts.append(self.stmt())
            self.expect("}")
            return A.Block(stmts)
        if self.accept("let"):
            name = self.ident()
            self.expect("=")
            v = self.expr()
            self.expect("in")
            return A.LetStmt(name, v, self.stmt())
        if self.accept("if"):
            c = self.expr()
            self.expect("then")
            th = self.stmt()
            el = self.stmt() if self.accept("else") else None
            return A.IfStmt(c, th, el)
        if self.accept("match"):
            scr = self.expr()
            self.expect("with")
            return A.MatchStmt(scr, self.match_cases(self.stmt))
        if self.at("raise"):
            self.advance()
            what = self.tok.text if self.tok.kind == IDENT else ""
            if what:
                self.advance()
            return A.RaiseStmt(what)
        if self.at("forall"):
            raise UnsupportedFeature("unsupported construct 'forall'", self.tok.span)
        if self.at("$") and self.peek().kind == IDENT and self.at("(", 2):
            # could be a statement model or a call-expression model on the lhs
            save = self.i
            inst = self.instantiation("stat")
            if self.at(":="):
                self.i = save
            else:
                return inst
        target = self.postfix()
        self.expect(":=")
        return A.Assign(target, self.expr())

    def match_cases(self, item) -> list:
        self.expect("{")
        cases = []
        while not self.at("}"):
            if self.at("_"):
                self.advance()
                pat = None
            else:
                pat = self.expr()
            self.expect("=>")
            cases.append((pat, item()))
            if not self.accept(","):
                break
        self.expect("}")
        return cases

    # -- expressions ------------------------------------------------------
    def expr(self) -> A.Expr:
        start = self.tok
        e = self._expr()
        if e.span is None:
            e.span = start.span
        return e

    def _expr(self) -> A.Expr:
        if self.accept("if"):
            c = self.expr()
            self.expect("then")
            th = self.expr()
            self.expect("else")
            return A.IfExpr(c, th, self.expr())
        if self.accept("let"):
            name = self.ident()
            self.expect("=")
            v = self.expr()
            self.expect("in")
            return A.LetExpr(name, v, self.expr())
        if self.accept("match"):
            scr = self.expr()
            self.expect("with")
            return A.MatchExpr(scr, self.match_cases(self.expr))
        return self.binary(1)

    def binary(self, min_prec) -> A.Expr:
        lhs = self.unary()
        while True:
            t = self.tok
            prec = BINARY_PREC.get(t.text) if t.kind == PUNCT else None
            if prec is None or prec < min_prec:
                return lhs
            self.advance()
            if self.at("if") or self.at("let") or self.at("match"):
                rhs = self.expr()
            else:
                rhs = self.binary(prec + 1)
            op = "=" if t.text == "==" else t.text
            lhs = A.Binary(op, lhs, rhs, span=t.span)

    def unary(self) -> A.Expr:
        t = self.tok
        if t.kind == PUNCT and t.text in ("-", "!", "~"):
            self.advance()
            return A.Unary(t.text, self.unary(), span=t.span)
        e = self.postfix()
        while self.at("as"):
            at = self.advance()
            e = A.Cast(e, self.type_ref(), span=at.span)
        return e

    def call_args(self):
        self.expect("(")
        args = []
        rng = None
        while not self.at(")"):
            a = self.expr()
            if self.accept(".."):
                rng = (a, self.expr())
                break
            args.append(a)
            if not self.accept(","):
                break
        self.expect(")")
        return args, rng

    def postfix(self) -> A.Expr:
        e = self.primary()
        while self.at("("):
            t = self.tok
            args, rng = self.call_args()
            if rng is not None:
                e = A.Slice(e, rng[0], rng[1], span=t.span)
            elif isinstance(e, A.Name):
                e = A.Call(e.id, args, span=e.span)
            elif len(args) == 1:
                e = A.Index(e, args[0], span=t.span)
            else:
                raise SpecSyntaxError("bit select takes exactly one index", t.span)
        return e

    def primary(self) -> A.Expr:
        t = self.tok
        if t.kind == INT:
            self.advance()
            return A.Lit(t.value, t.width, span=t.span)
        if t.kind == STRING:
            self.advance()
            return A.StrLit(t.value, span=t.span)
        if t.kind == IDENT:
            if t.text in ("true", "false"):
                self.advance()
                return A.BoolLit(t.text == "true", span=t.span)
            if t.text == "forall":
                raise UnsupportedFeature("unsupported construct 'forall'", t.span)
            if t.text == "raise":
                raise UnsupportedFeature("unsupported construct 'raise'", t.span)
            self.advance()
            if self.at("::"):
                self.advance()
                return A.EnumRef(t.text, self.ident(), span=t.span)
            # sized access: NAME<n>(...)
            if self.at("<") and self.peek().kind in (INT, IDENT) and self.at(">", 2) and self.at("(", 3):
                self.advance()
                size = self.primary()
                self.expect(">")
                args, rng = self.call_args()
                if rng is not None:
                    raise SpecSyntaxError("range not allowed in sized access", t.span)
                return A.Call(t.text, args, size, span=t.span)
            return A.Name(t.text, span=t.span)
        if t.kind == PUNCT and t.text == "(":
            self.advance()
            items = [self.expr()]
            while self.accept(","):
                items.append(self.expr())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return A.Tuple(items, span=t.span)
        if t.kind == PUNCT and t.text == "$":
            return self.instantiation("expr")
        self.error("expected an expression")

    # -- micro architecture -------------------------------------------------
    def mia(self) -> A.MiaDef:
        self.expect("micro"); self.expect("architecture")
        name = self.ident()
        self.expect("implements")
        isa = self.ident()
        self.expect("=")
        self.expect("{")
        stages, logics = [], []
        while not self.at("}"):
            anns = self.annotations()
            start = self.tok
            if self.accept("stage"):
                sname = self.ident()
                outs = []
                if self.accept("->"):
                    self.expect("(")
                    while not self.at(")"):
                        o = self.ident()
                        self.expect(":")
                        outs.append((o, self.ident()))
                        if not self.accept(","):
                            break
                    self.expect(")")
                self.expect("=")
                d = A.StageDef(sname, outs, self.mblock())
                stages.append(d)
            elif self.accept("logic"):
                d = A.LogicDef(self.ident())
                logics.append(d)
            elif self.tok.text in ("cache", "reorder", "reservation", "dispatch", "retire", "unit"):
                raise UnsupportedFeature(f"unsupported construct '{self.tok.text}'", self.tok.span)
            else:
                self.error("expected 'stage' or 'logic'")
            d.span = start.span
            d.annotations = anns
        self.expect("}")
        return A.MiaDef(name, isa, stages, logics)

    def mblock(self) -> list:
        self.expect("{")
        out = []
        while not self.at("}"):
            if self.at_end():
                self.error("expected '}'")
            if self.at("{"):
                out.extend(self.mblock())
            else:
                out.append(self.mstmt())
        self.expect("}")
        return out

    def mbody(self) -> list:
        if self.at("{"):
            return self.mblock()
        return [self.mstmt()]

    def mstmt(self):
        start = self.tok
        if self.accept("let"):
            name = self.ident()
            self.expect("=")
            v = self.mexpr()
            self.expect("in")
            return A.MLet(name, v, self.mbody(), span=start.span)
        if self.accept("if"):
            c = self.mexpr()
            self.expect("then")
            th = self.mbody()
            el = self.mbody() if self.accept("else") else []
            return A.MIf(c, th, el, span=start.span)
        if self.accept("raise"):
            return A.MRaise(self.ident(), span=start.span)
        name = self.ident()
        if self.accept(":="):
            return A.MAssign(name, self.mexpr(), span=start.span)
        self.expect(".")
        method = self.ident()
        args = []
        if self.accept("("):
            while not self.at(")"):
                self.expect("@")
                args.append(self.ident())
                if not self.accept(","):
                    break
            self.expect(")")
        return A.MCall(name, method, args, span=start.span)

    def mexpr(self):
        start = self.tok
        if self.accept("fetchNext"):
            return A.MFetchNext(span=start.span)
        if self.accept("decode"):
            self.expect("(")
            arg = self.mexpr()
            self.expect(")")
            return A.MDecode(arg, span=start.span)
        if self.accept("("):
            e = self.mexpr()
            self.expect(")")
            return e
        name = self.ident()
        member = self.ident() if self.accept(".") else None
        return A.MRef(name, member, span=start.span)

    # -- micro processor ----------------------------------------------------
    def processor(self) -> A.ProcessorDef:
        self.expect("micro"); self.expect("processor")
        name = self.ident()
        self.expect("implements")
        isa = self.ident()
        self.expect("=")
        self.expect("{")
        items = []
        while not self.at("}"):
            key = self.tok
            if key.text in ("start", "stop"):
                self.advance()
                self.expect("=")
                items.append((key.text, self.expr()))
            elif key.text in ("firmware", "reset"):
                raise UnsupportedFeature(f"unsupported construct '{key.text}'", key.span)
            else:
                self.error("expected 'start' or 'stop'")
        self.expect("}")
        return A.ProcessorDef(name, isa, items)


# -- entry points used by macro expansion -------------------------------------
def parse_tokens(tokens: list[Token], kind: str):
    """Parse a complete token list as one syntactic category."""
    toks = list(tokens)
    if not toks or toks[-1].kind != EOF:
        toks.append(Token(EOF, "", toks[-1].span if toks else NOSPAN))
    p = Parser(toks)
    if kind in ("Ex",):
        r = p.expr()
    elif kind == "Id":
        r = p.ident()
    elif kind == "Bin":
        t = p.tok
        if t.kind != INT or not t.text.lower().startswith("0b"):
            p.error("expected a binary literal")
        p.advance()
        r = A.Lit(t.value, t.width, span=t.span)
    elif kind == "BinOp":
        t = p.tok
        if t.kind != PUNCT or t.text not in BINARY_PREC:
            p.error("expected a binary operator")
        r = p.advance().text
    elif kind == "Stat":
        stmts = []
        while not p.at_end():
            stmts.append(p.stmt())
        r = stmts[0] if len(stmts) == 1 else A.Block(stmts, span=toks[0].span)
    elif kind == "CallEx":
        r = p.postfix()
        if not isinstance(r, (A.Call, A.Name)):
            p.error("expected a call expression")
    elif kind == "IsaDefs":
        r = p.isa_defs(p.at_end)
    elif kind == "Encs":
        r = p.encs_list(p.at_end)
    else:
        raise ValueError(kind)
    if not p.at_end():
        p.error(f"unexpected trailing tokens for {kind}")
    return r


def parse_spec(text: str, file: str = "<input>") -> A.SpecAst:
    return Parser(tokenize(text, file)).parse_file()
