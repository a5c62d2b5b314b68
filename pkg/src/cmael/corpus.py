"""Regression corpora: files of ``<SAT|UNSAT> <formula>`` lines.

An ``agents: a,b,c`` header line sets the agent universe for the lines
after it.  Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .formula import ParseError, Universe, parse
from .hintikka import ExtractionError
from .solver import VerificationError, solve
from .tableau import Options, ResourceLimitError


class CorpusError(ValueError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class Case:
    line: int
    agents: tuple[str, ...]
    expected: str
    text: str


@dataclass
class CaseResult:
    case: Case
    verdict: str                   # SAT, UNSAT, or ERROR
    nodes: int
    seconds: float
    size: int
    log_json: str = ""
    model_json: str = ""
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict == self.case.expected

    def verdict_line(self) -> str:
        status = "ok" if self.ok else "MISMATCH"
        return f"line {self.case.line}: {self.verdict} (expected {self.case.expected}) {status} :: {self.case.text}"


def read_corpus(path: str) -> list[Case]:
    cases = []
    agents: tuple[str, ...] | None = None
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.lower().startswith("agents:"):
                names = tuple(a.strip() for a in line.split(":", 1)[1].split(",") if a.strip())
                try:
                    Universe(names)
                except ValueError as exc:
                    raise CorpusError(path, n, str(exc)) from None
                agents = names
                continue
            expected, _, text = line.partition(" ")
            if expected not in ("SAT", "UNSAT") or not text.strip():
                raise CorpusError(path, n, "expected '<SAT|UNSAT> <formula>'")
            if agents is None:
                raise CorpusError(path, n, "formula before any 'agents:' header")
            try:
                parse(text.strip(), Universe(agents))
            except ParseError as exc:
                raise CorpusError(path, n, exc.pretty()) from None
            cases.append(Case(n, agents, expected, text.strip()))
    return cases


def run_case(case: Case, options: Options = Options()) -> CaseResult:
    universe = Universe(case.agents)
    theta = parse(case.text, universe)
    try:
        outcome = solve(theta, universe, options)
    except ResourceLimitError as exc:
        return CaseResult(case, "ERROR", options.max_nodes, 0.0, theta.size, error=str(exc))
    except (VerificationError, ExtractionError) as exc:
        return CaseResult(case, "ERROR", 0, 0.0, theta.size, error=f"verification failed: {exc}")
    log_json = json.dumps(outcome.result.tableau.log_json(), indent=1) + "\n"
    model_json = outcome.model.dumps() if outcome.model is not None else ""
    return CaseResult(
        case, outcome.verdict, outcome.node_count, outcome.seconds, theta.size, log_json, model_json
    )


def run_corpus(cases: list[Case], options: Options = Options(), jobs: int = 1) -> list[CaseResult]:
    if jobs <= 1:
        return [run_case(c, options) for c in cases]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_case, cases, [options] * len(cases)))


def write_artifacts(results: list[CaseResult], directory: str) -> None:
    """Verdict lines plus per-case elimination logs and models, all free of timings."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "verdicts.txt"), "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(r.verdict_line() + "\n")
    for r in results:
        stem = os.path.join(directory, f"line{r.case.line:04d}")
        with open(stem + ".log.json", "w", encoding="utf-8") as fh:
            fh.write(r.log_json)
        if r.model_json:
            with open(stem + ".model.json", "w", encoding="utf-8") as fh:
                fh.write(r.model_json)


def summary_table(results: list[CaseResult]) -> str:
    rows = ["line  expect  got     size  nodes     seconds  formula"]
    for r in results:
        mark = "" if r.ok else "  <-- " + (r.error or "mismatch")
        rows.append(
            f"{r.case.line:<5} {r.case.expected:<7} {r.verdict:<7} {r.size:<5} {r.nodes:<9} "
            f"{r.seconds:<8.3f} {r.case.text}{mark}"
        )
    passed = sum(r.ok for r in results)
    rows.append(f"{passed}/{len(results)} passed, max nodes {max((r.nodes for r in results), default=0)}, "
                f"total {sum(r.seconds for r in results):.2f}s")
    return "\n".join(rows) + "\n"
