"""Description frontend: lexing, parsing, macro expansion, elaboration."""
from .elaborate import elaborate
from .loader import load_spec, load_text, parse_file
from .macros import expand_macros
from .parser import parse_spec

__all__ = ["parse_spec", "parse_file", "expand_macros", "elaborate", "load_spec", "load_text"]
