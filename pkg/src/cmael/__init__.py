"""Satisfiability for the multi-agent epistemic logic with common and
distributed knowledge, by an incremental tableau."""

from .formula import And, Atom, C, D, Formula, Not, ParseError, Universe, parse
from .kripke import PseudoModel
from .semantics import satisfies, validate_frame
from .solver import Outcome, VerificationError, solve
from .tableau import Options, decide

__all__ = [
    "And", "Atom", "C", "D", "Formula", "Not", "ParseError", "Universe", "parse",
    "PseudoModel", "satisfies", "validate_frame",
    "Outcome", "VerificationError", "solve",
    "Options", "decide",
]
