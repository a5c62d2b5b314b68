"""Command-line interface.

Exit codes: 0 SAT (or true for ``check``), 1 UNSAT (or false), 2 input
error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .dot import model_dot, pretableau_dot, tableau_stages_dot
from .formula import ParseError, Universe, parse
from .hintikka import ExtractionError
from .kripke import PseudoModel
from .semantics import EvalContext, EvaluationError, satisfies
from .solver import VerificationError, certify
from .tableau import Options, ResourceLimitError, build_pretableau, eliminate, prestate_elimination, Result

EXIT_SAT, EXIT_UNSAT, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2, 3


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmael", description="Satisfiability for CMAEL(CD).")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="decide a formula")
    solve.add_argument("formula", help="formula text, or @path to read it from a file")
    solve.add_argument("--agents", required=True, help="comma-separated agent names")
    solve.add_argument("--model", metavar="PATH", help="write the verified model as JSON")
    solve.add_argument("--dot-pretableau", metavar="PATH")
    solve.add_argument("--dot-tableau", metavar="PATH", help="initial tableau and every elimination stage")
    solve.add_argument("--dot-model", metavar="PATH")
    solve.add_argument("--log", metavar="PATH", help="elimination log as JSON")
    solve.add_argument("--max-nodes", type=_positive, default=Options.max_nodes)
    solve.add_argument("--split-conjuncts", action="store_true", help="root prestate is the conjunct set")

    check = sub.add_parser("check", help="evaluate a formula in a model file")
    check.add_argument("model")
    check.add_argument("formula")
    check.add_argument("--all", action="store_true", help="report every state even when a root is set")

    corpus = sub.add_parser("corpus", help="run a regression corpus")
    corpus.add_argument("path")
    corpus.add_argument("--max-nodes", type=_positive, default=Options.max_nodes)
    corpus.add_argument("--jobs", type=_positive, default=1)
    corpus.add_argument("--out", metavar="DIR", help="write verdict lines, logs and models here")
    return parser


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _read_formula(arg: str) -> str:
    if arg.startswith("@"):
        with open(arg[1:], encoding="utf-8") as fh:
            return fh.read().strip()
    return arg


def cmd_solve(args) -> int:
    try:
        universe = Universe.parse(args.agents)
        text = _read_formula(args.formula)
        theta = parse(text, universe)
    except ParseError as exc:
        print(f"error: {exc.pretty()}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    options = Options(max_nodes=args.max_nodes, split_conjuncts=args.split_conjuncts)
    try:
        pre = build_pretableau(theta, universe, options)
    except ResourceLimitError as exc:
        print(f"error: {exc}; raise --max-nodes", file=sys.stderr)
        return EXIT_INPUT
    tab = eliminate(prestate_elimination(pre))
    result = Result(tab.is_open(), pre, tab)
    _write(args.dot_pretableau, pretableau_dot(pre))
    _write(args.dot_tableau, tableau_stages_dot(tab))
    _write(args.log, json.dumps(tab.log_json(), indent=1) + "\n")
    print(f"nodes: {pre.node_count} (prestates {len(pre.prestates)}, states {len(pre.states)}, "
          f"alive {len(tab.alive_states())})", file=sys.stderr)
    if not result.satisfiable:
        print("verdict: UNSAT")
        return EXIT_UNSAT
    try:
        _, model, frame = certify(theta, result)
    except (VerificationError, ExtractionError) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"model: {len(model.states)} states, frame {frame.kind}", file=sys.stderr)
    _write(args.model, model.dumps())
    _write(args.dot_model, model_dot(model))
    print("verdict: SAT")
    return EXIT_SAT


def cmd_check(args) -> int:
    try:
        model = PseudoModel.load(args.model)
        phi = parse(_read_formula(args.formula), model.universe)
    except ParseError as exc:
        print(f"error: {exc.pretty()}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    ctx = EvalContext(model)
    try:
        if model.root is not None and not args.all:
            value = satisfies(model, model.root, phi, ctx)
            print("true" if value else "false")
            return EXIT_SAT if value else EXIT_UNSAT
        values = [satisfies(model, s, phi, ctx) for s in model.states]
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for s, v in zip(model.states, values):
        print(f"{s}: {'true' if v else 'false'}")
    return EXIT_SAT if all(values) else EXIT_UNSAT


def cmd_corpus(args) -> int:
    from .corpus import CorpusError, read_corpus, run_corpus, summary_table, write_artifacts

    try:
        cases = read_corpus(args.path)
    except (CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    results = run_corpus(cases, Options(max_nodes=args.max_nodes), jobs=args.jobs)
    sys.stdout.write(summary_table(results))
    if args.out:
        write_artifacts(results, args.out)
    if any(r.error.startswith("verification") for r in results):
        return EXIT_VERIFY
    return 0 if all(r.ok for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": cmd_solve, "check": cmd_check, "corpus": cmd_corpus}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
