"""pdlkit: a single-source processor description toolkit."""
import os

from .frontend import load_spec, load_text

__version__ = "0.1.0"

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
RV32I_SPEC = os.path.join(DATA_DIR, "rv32i.pdl")

__all__ = ["load_spec", "load_text", "DATA_DIR", "RV32I_SPEC"]
