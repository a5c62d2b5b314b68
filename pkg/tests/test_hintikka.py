import random

import pytest

from cmael.formula import And, Atom, C, D, FormulaSet, Not, Universe, extended_closure, parse
from cmael.generate import random_formula
from cmael.hintikka import (
    ExtractionError, HintikkaStructure, build_component, extract_hintikka, hintikka_to_pseudo_model,
    structure_from_model, truth_preservation_failures, verify_hintikka,
)
from cmael.kripke import identity
from cmael.semantics import EvalContext, enumerate_pseudo_models, extended_labeling, satisfies, validate_frame
from cmael.solver import certify, solve
from cmael.tableau import decide, mark_realized

AB = Universe(["a", "b"])
ABC = Universe(["a", "b", "c"])
p, q = Atom("p"), Atom("q")
EX2 = "C{a,b}p & C{b,c}p & ~C{a,c}p"


def single(labels, universe=AB):
    rel = {m: identity(labels) for m in universe.coalitions()}
    return HintikkaStructure(universe, {s: FormulaSet(l) for s, l in labels.items()}, rel, root=0)


def test_single_state_passes():
    assert verify_hintikka(single({0: [p]})).ok


def test_complementary_pair_is_h1():
    report = verify_hintikka(single({0: [p, Not(p)]}))
    assert report.violation.condition == "H1" and "H1" in str(report)


def test_missing_expansion_is_h2():
    report = verify_hintikka(single({0: [And(p, q), p]}))
    assert report.violation.condition == "H2" and report.violation.formula == And(p, q)


def test_missing_witness_is_h3():
    f = Not(D("a", p))
    report = verify_hintikka(single({0: [f, p, Not(D("ab", p))]}))
    assert report.violation.condition == "H3"


def test_disagreement_across_edge_is_h4():
    labels = {0: FormulaSet([D("a", p), D("ab", p), p]), 1: FormulaSet([p])}
    rel = {m: identity([0, 1]) for m in AB.coalitions()}
    rel[AB.mask("a")] = rel[AB.mask("a")] | {(0, 1), (1, 0)}
    report = verify_hintikka(HintikkaStructure(AB, labels, rel))
    assert report.violation.condition == "H4"


def test_unfulfilled_eventuality_is_h5():
    ev = Not(C("a", p))
    lab = [ev, p, Not(D("a", And(p, C("a", p))))]
    labels = {0: FormulaSet(lab), 1: FormulaSet([p, Not(And(p, C("a", p))), Not(C("a", p)),
                                                   Not(D("a", And(p, C("a", p))))])}
    rel = {m: identity([0, 1]) | {(0, 1), (1, 0)} for m in AB.coalitions()}
    # H3 passes via the other state; nobody carries ~p.
    report = verify_hintikka(HintikkaStructure(AB, labels, rel))
    assert report.violation.condition == "H5"


def test_trivial_extraction():
    r = decide(p, AB)
    S, comps = extract_hintikka(r.tableau)
    assert list(S.labels) == [0] and S.labels[0] == FormulaSet([p])
    assert len(comps) == 1 and comps[0].leaves == [] and comps[0].eventuality is None
    model = hintikka_to_pseudo_model(S)
    assert model.labeling == {0: ("p",)}
    assert all(model.relations[m] == identity([0]) for m in AB.coalitions())


def test_closed_tableau_refuses_extraction():
    r = decide(parse("p & ~p", AB), AB)
    with pytest.raises(ExtractionError):
        extract_hintikka(r.tableau)


@pytest.fixture(scope="module")
def example2():
    theta = parse(EX2, ABC)
    return theta, decide(theta, ABC)


def test_second_example_reaches_not_p(example2):
    theta, r = example2
    S, _ = extract_hintikka(r.tableau)
    assert verify_hintikka(S).ok
    assert theta in S.labels[S.root]
    ac = ABC.mask("ac")
    assert any(Not(p) in S.labels[t] for t in S.common(ac)[S.root])


def test_second_example_component_follows_witness_path(example2):
    theta, r = example2
    tab = r.tableau
    xi = tab.space.index[parse("~C{a,c}p", ABC)]
    k = tab.eventuality_list.index(xi)
    start = tab.root_state()
    comp = build_component(tab, start, k)
    path = mark_realized(tab, xi).path(start)
    assert [s for _, s in comp.nodes] == [start] + [t for _, t in path]
    assert Not(p) in tab.label(comp.nodes[-1][1])
    assert comp.eventuality == parse("~C{a,c}p", ABC)


def test_component_without_eventuality_is_simple():
    r = decide(parse("~D{a}p & ~D{b}q", AB), AB)
    tab = r.tableau
    comp = build_component(tab, tab.root_state(), 0)
    assert len(comp.nodes) == 1 and comp.edges == []
    marks = sorted(str(m) for _, m, _ in comp.leaves)
    assert marks == ["~D{a}p", "~D{b}q"]


def test_build_component_needs_alive_state():
    r = decide(parse("C{a,b}p & C{b,c}p & ~C{a,c}p", ABC), ABC)
    dead = r.tableau.alive.index(False)
    with pytest.raises(ExtractionError):
        build_component(r.tableau, dead, 0)


def _sat_cases(n, seed, size=12):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        u = AB if rng.random() < 0.5 else ABC
        f = random_formula(rng, u, ["p", "q"], size)
        r = decide(f, u)
        if r.satisfiable:
            out.append((f, u, r))
    return out


def test_component_count_is_bounded():
    for f, u, r in _sat_cases(60, 11):
        tab = r.tableau
        _, comps = extract_hintikka(tab)
        assert len(comps) <= len(tab.alive_states()) * (len(tab.eventuality_list) + 1)
        assert len({c.key for c in comps}) == len(comps)


def test_conversion_properties():
    for f, u, r in _sat_cases(60, 12):
        S, _ = extract_hintikka(r.tableau)
        model = hintikka_to_pseudo_model(S)
        assert validate_frame(model).at_least_pseudo
        for m in u.coalitions():
            for b in u.supersets(m):
                assert S.relations[b] <= model.relations[m]
        assert truth_preservation_failures(S, model) == []
        assert satisfies(model, model.root, f)


def test_extended_labeling_of_models_is_hintikka():
    theta = parse("~C{a,b}(p & ~D{a}q)", AB)
    ecl = extended_closure(theta, AB)
    for model in enumerate_pseudo_models(AB, 2, ["p", "q"]):
        labels = extended_labeling(model, ecl, EvalContext(model))
        assert verify_hintikka(structure_from_model(model, labels)).ok


def test_certify_returns_checked_model(example2):
    theta, r = example2
    S, model, frame = certify(theta, r)
    assert frame.at_least_pseudo
    assert satisfies(model, model.root, theta)
    outcome = solve(theta, ABC)
    assert outcome.verdict == "SAT" and outcome.model.dumps() == model.dumps()
