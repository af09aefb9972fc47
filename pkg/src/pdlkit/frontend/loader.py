"""File loading: import resolution followed by the frontend pipeline."""
from __future__ import annotations

import os

from ..errors import SpecImportError
from . import ast as A
from .elaborate import elaborate
from .macros import expand_macros
from .parser import parse_spec

MAX_IMPORT_DEPTH = 16


def parse_file(path: str, _depth: int = 0, _active: tuple = ()) -> A.SpecAst:
    """Parse a file and splice in the definitions of its imports."""
    path = os.path.abspath(path)
    if _depth > MAX_IMPORT_DEPTH:
        raise SpecImportError(f"import depth exceeds {MAX_IMPORT_DEPTH} at {path}")
    if path in _active:
        raise SpecImportError(f"import cycle through {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise SpecImportError(f"cannot read {path}: {e.strerror}") from None
    ast = parse_spec(text, path)
    out = []
    for d in ast.definitions:
        if isinstance(d, A.ImportDef):
            target = os.path.join(os.path.dirname(path), d.path)
            if not os.path.exists(target):
                raise SpecImportError(f"imported file not found: {d.path}", d.span)
            out.extend(parse_file(target, _depth + 1, _active + (path,)).definitions)
        else:
            out.append(d)
    return A.SpecAst(out, span=ast.span)


def load_text(text: str, file: str = "<input>"):
    return elaborate(expand_macros(parse_spec(text, file)))


def load_spec(path: str):
    """Parse, expand and elaborate a description file into a SpecModel."""
    return elaborate(expand_macros(parse_file(path)))
