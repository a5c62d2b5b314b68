"""End-to-end solve: decide, and on SAT extract, verify and convert a model."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .formula import Formula, Universe, conjuncts
from .hintikka import (
    HintikkaStructure,
    extract_hintikka,
    hintikka_to_pseudo_model,
    truth_preservation_failures,
    verify_hintikka,
)
from .kripke import PseudoModel
from .semantics import EvalContext, FrameReport, satisfies, validate_frame
from .tableau import Options, Result, decide


class VerificationError(RuntimeError):
    """An emitted structure failed one of the mandatory checks."""


@dataclass
class Outcome:
    formula: Formula
    result: Result
    structure: HintikkaStructure | None = None
    model: PseudoModel | None = None
    frame: FrameReport | None = None
    seconds: float = 0.0

    @property
    def verdict(self) -> str:
        return self.result.verdict

    @property
    def node_count(self) -> int:
        return self.result.node_count


def certify(theta: Formula, result: Result) -> tuple[HintikkaStructure, PseudoModel, FrameReport]:
    """Build the model for an open tableau and check it; raises on any defect."""
    tab = result.tableau
    structure, _ = extract_hintikka(tab)
    report = verify_hintikka(structure)
    if not report.ok:
        raise VerificationError(f"extracted structure is not a Hintikka structure: {report.violation}")
    model = hintikka_to_pseudo_model(structure)
    frame = validate_frame(model)
    if not frame.at_least_pseudo:
        raise VerificationError(f"model frame invalid: {frame.witness}")
    bad = truth_preservation_failures(structure, model)
    if bad:
        s, f = bad[0]
        raise VerificationError(f"state {s} carries {f} but the model falsifies it")
    ctx = EvalContext(model)
    for f in [theta, *conjuncts(theta)]:
        if not satisfies(model, model.root, f, ctx):
            raise VerificationError(f"root does not satisfy {f}")
    return structure, model, frame


def solve(theta: Formula, universe: Universe, options: Options = Options(), *, build_model: bool = True) -> Outcome:
    start = time.perf_counter()
    result = decide(theta, universe, options)
    outcome = Outcome(theta, result)
    if result.satisfiable and build_model:
        outcome.structure, outcome.model, outcome.frame = certify(theta, result)
    outcome.seconds = time.perf_counter() - start
    return outcome
