"""Exception hierarchy shared by all pdlkit modules."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


NOSPAN = Span("<builtin>", 0, 0)


class PdlError(Exception):
    """Base class for user-facing errors (CLI exit code 1)."""

    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span
        # other errors found in the same pass, including this one
        self.all: list[PdlError] = [self]
        super().__init__(f"{span}: {message}" if span else message)


class InternalError(Exception):
    """Broken internal invariant (CLI exit code 2)."""


# -- frontend --------------------------------------------------------------
class SpecSyntaxError(PdlError):
    pass


class UnsupportedFeature(PdlError):
    pass


class SpecImportError(PdlError):
    pass


class MacroTypeError(PdlError):
    pass


class UnknownModel(PdlError):
    pass


class SpecNameError(PdlError):
    pass


class SpecTypeError(PdlError):
    pass


class FormatOverlapError(PdlError):
    pass


class WriteBeforeReadError(PdlError):
    pass


class DoubleWriteError(PdlError):
    pass


# -- decode ----------------------------------------------------------------
class EncodingWidthError(PdlError):
    pass


class AmbiguityError(PdlError):
    def __init__(self, message, a=None, b=None, witness=None):
        super().__init__(message)
        self.a, self.b, self.witness = a, b, witness


class DuplicatePatternError(PdlError):
    pass


# -- asm -------------------------------------------------------------------
class MissingOperand(PdlError):
    pass


class DomainTooLarge(PdlError):
    def __init__(self, message, size=0):
        super().__init__(message)
        self.size = size


class NonInjective(PdlError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GrammarError(PdlError):
    pass


class AsmParseError(PdlError):
    def __init__(self, message, position=0, expected=()):
        super().__init__(message)
        self.position = position
        self.expected = tuple(expected)


class NoMatchingInstruction(PdlError):
    pass


class OperandRangeError(PdlError):
    pass


class PredicateViolation(PdlError):
    def __init__(self, operand, value, description):
        super().__init__(f"operand {operand}={value}: {description}")
        self.operand, self.value, self.description = operand, value, description


class UnknownInstructionWord(PdlError):
    pass


# -- simulation ------------------------------------------------------------
class AddressOverflow(PdlError):
    pass


class InvalidInstruction(PdlError):
    def __init__(self, pc, word):
        super().__init__(f"invalid instruction {word:#x} at pc {pc:#x}")
        self.pc, self.word = pc, word


class MisalignedFetch(PdlError):
    def __init__(self, pc):
        super().__init__(f"misaligned fetch at pc {pc:#x}")
        self.pc = pc


class DoubleWrite(PdlError):
    pass


class MaxCycles(PdlError):
    pass


class DivergenceError(PdlError):
    def __init__(self, message, step=0):
        super().__init__(message)
        self.step = step


# -- mia -------------------------------------------------------------------
class ResidualSemanticsError(PdlError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        # instruction name -> list of unplaced node descriptions
        self.residual = residual or {}


class NotReadyError(PdlError):
    pass


class UnsupportedMapping(PdlError):
    pass


class PortConflict(PdlError):
    pass
