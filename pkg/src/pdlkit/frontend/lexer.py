"""Tokenizer for .pdl description text."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import Span, SpecSyntaxError

IDENT, INT, STRING, PUNCT, EOF = "ident", "int", "string", "punct", "eof"

# longest first
PUNCTS = [
    ":=", "->", "=>", "..", "::", "<<", ">>", "<=", ">=", "!=", "==", "&&", "||",
    "{", "}", "(", ")", "[", "]", "<", ">", ",", ";", ":", "=", "+", "-", "*",
    "/", "%", "&", "|", "^", "~", "!", "$", "@", ".",
]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: Span
    value: int | str | None = None
    width: int | None = None  # digit width of binary/hex literals

    def is_(self, kind, text=None):
        return self.kind == kind and (text is None or self.text == text)

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def _digits(s: str, i: int, allowed: str) -> int:
    while i < len(s) and (s[i] in allowed or s[i] == "'"):
        i += 1
    return i


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i, line, col0 = 0, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col0 = i + 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            continue
        span = Span(file, line, i - col0 + 1)
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise SpecSyntaxError("unterminated comment", span)
            line += text.count("\n", i, j)
            if "\n" in text[i:j]:
                col0 = text.rfind("\n", i, j) + 1
            i = j + 2
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token(IDENT, text[i:j], span, text[i:j]))
            i = j
            continue
        if c.isdigit():
            toks.append(_number(text, i, span))
            i += len(toks[-1].text)
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise SpecSyntaxError("unterminated string", span)
                if text[j] == "\\" and j + 1 < n:
                    buf.append({"n": "\n", "t": "\t"}.get(text[j + 1], text[j + 1]))
                    j += 2
                    continue
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SpecSyntaxError("unterminated string", span)
            toks.append(Token(STRING, text[i:j + 1], span, "".join(buf)))
            i = j + 1
            continue
        for p in PUNCTS:
            if text.startswith(p, i):
                toks.append(Token(PUNCT, p, span))
                i += len(p)
                break
        else:
            raise SpecSyntaxError(f"unexpected character {c!r}", span)
    toks.append(Token(EOF, "", Span(file, line, n - col0 + 1)))
    return toks


def _number(text: str, i: int, span: Span) -> Token:
    low = text[i:i + 2].lower()
    if low in ("0b", "0x"):
        allowed = "01" if low == "0b" else "0123456789abcdefABCDEF"
        j = _digits(text, i + 2, allowed)
        raw = text[i:j]
        digits = raw[2:].replace("'", "")
        if not digits:
            raise SpecSyntaxError(f"malformed literal {raw!r}", span)
        per = 1 if low == "0b" else 4
        return Token(INT, raw, span, int(digits, 2 if per == 1 else 16), per * len(digits))
    j = _digits(text, i, "0123456789")
    raw = text[i:j]
    return Token(INT, raw, span, int(raw.replace("'", "")), None)
