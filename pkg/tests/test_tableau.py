import random
from itertools import combinations

import pytest

from cmael.formula import And, Atom, C, D, Not, Universe, extended_closure, parse
from cmael.generate import random_formula
from cmael.hintikka import expansion_defect, extract_hintikka, verify_hintikka
from cmael.semantics import BatchEvaluator, disjoint_union, enumerate_pseudo_models
from cmael.tableau import (
    LabelSpace, Options, ResourceLimitError, Tableau, bits, build_pretableau, decide, eliminate,
    is_fully_expanded, mark_realized, minimal_fully_expanded_extensions, prestate_elimination, rule_e2,
)

AB = Universe(["a", "b"])
ABC = Universe(["a", "b", "c"])
p, q = Atom("p"), Atom("q")
EX1 = "~D{a,c}C{a,b}p & C{a,b}(p&q)"
EX2 = "C{a,b}p & C{b,c}p & ~C{a,c}p"


def example1(**kw):
    theta = parse(EX1, ABC)
    return theta, build_pretableau(theta, ABC, Options(split_conjuncts=True, **kw))


def pieces():
    cab = C("ab", p)
    cpq = C("ab", And(p, q))
    box = And(And(p, q), cpq)
    return dict(
        chi0=Not(D("ac", cab)),
        chi1=Not(D("a", And(p, cab))),
        chi2=Not(D("b", And(p, cab))),
        da=D("a", box), db=D("b", box), ev=Not(cab), box=box,
    )


# -- full expansion -----------------------------------------------------------

def test_fully_expanded_examples():
    assert is_fully_expanded([p], AB)
    assert not is_fully_expanded([C("ab", p)], AB)


def test_initial_state_of_first_example_is_fully_expanded():
    _, pre = example1()
    x = pieces()
    sid = pre.state_of(pre.state_label(0))
    label = pre.state_label(sid)
    assert {x["chi0"], x["da"], x["db"]} <= set(label)
    assert pre.space.is_fully_expanded(pre.states[sid])
    assert expansion_defect(label, ABC) is None


def test_minimal_extensions_of_atom():
    assert minimal_fully_expanded_extensions([p], AB) == [{p}]


def _clashes(delta):
    return any(Not(f) in delta for f in delta)


def _oracle_extensions(gamma, universe):
    ecl = list(extended_closure(gamma, universe))
    rest = [f for f in ecl if f not in gamma]
    full = []
    for k in range(len(rest) + 1):
        for extra in combinations(rest, k):
            delta = frozenset(gamma) | frozenset(extra)
            if expansion_defect(delta, universe) is None:
                full.append(delta)
    minimal = {d for d in full if not any(e < d for e in full)}
    return full, minimal


@pytest.mark.parametrize("text", [
    "~C{a,b}p",
    "~(p & q)",
    "~(p & D{a}q)",
    "~D{a}~D{a,b}p",
    "C{a}p & ~D{b}p",
    "~(~C{a}p & q)",
])
def test_sr_against_powerset_oracle(text):
    gamma = [parse(text, AB)]
    assert len(extended_closure(gamma, AB)) <= 16
    full, minimal = _oracle_extensions(gamma, AB)
    got = {frozenset(d) for d in minimal_fully_expanded_extensions(gamma, AB)}
    assert got == minimal
    space = LabelSpace(gamma, AB, Options(introspection_cut=False))
    eager = [frozenset(space.label(m)) for m in space.saturations(space.mask(gamma))]
    assert {d for d in minimal if expansion_defect(d, AB) is None and not _clashes(d)} <= set(eager)
    assert all(d in full for d in eager)
    for delta in full:
        assert any(m <= delta for m in got)
        assert space.is_fully_expanded(space.mask(delta))


def test_label_space_agrees_with_formula_level_check():
    gamma = [parse("~C{a,b}(p & ~D{a}p)", AB)]
    space = LabelSpace(gamma, AB)
    rng = random.Random(5)
    n = len(space)
    for _ in range(2000):
        mask = rng.getrandbits(n)
        assert space.is_fully_expanded(mask) == (expansion_defect(space.label(mask), AB) is None)


# -- construction ---------------------------------------------------------------

def test_first_example_prestates_and_branching():
    _, pre = example1()
    x = pieces()
    sp = pre.space
    g1 = [i for i in range(len(pre.prestates)) if x["ev"] in pre.prestate_label(i) and x["da"] in pre.prestate_label(i)]
    assert g1
    assert x["db"] not in pre.prestate_label(g1[0])
    ext = sp.minimal_extensions(pre.prestates[g1[0]])
    assert len(ext) == 2
    assert sorted((x["chi1"] in sp.label(m), x["chi2"] in sp.label(m)) for m in ext) == [(False, True), (True, False)]
    g2 = [i for i in range(len(pre.prestates)) if Not(And(p, C("ab", p))) in pre.prestate_label(i)]
    assert g2
    gamma2 = pre.prestates[g2[0]]
    # The carried-over mark already settles the choice, so only two are minimal.
    assert len(sp.minimal_extensions(gamma2)) == 2
    ext = sp.expansions(gamma2)
    assert len(ext) == 3
    assert sum(sp.inconsistent(m) for m in ext) == 1
    assert set(ext) == {pre.states[t] for t in pre.double[g2[0]]}


def test_dr_prestate_content():
    theta = parse("~D{a}p", AB)
    pre = build_pretableau(theta, AB)
    assert len(pre.states) == 2 and pre.state_label(0) == {theta}
    ((mark, pid),) = pre.marked[0]
    assert pre.space.formulas[mark] is theta
    assert Not(p) in pre.prestate_label(pid)


def test_trivial_pretableau():
    pre = build_pretableau(p, AB)
    assert len(pre.prestates) == 1 and len(pre.states) == 1
    assert pre.marked == [[]]


def test_dr_reuses_prestates_and_skips_inconsistent_states():
    _, pre = example1()
    labels = pre.prestates
    assert len(labels) == len(set(labels))
    for sid, label in enumerate(pre.states):
        if pre.space.inconsistent(label):
            assert pre.marked[sid] == []
        assert pre.rule_dr(sid) == []


def test_prestate_elimination_routes_to_all_states():
    _, pre = example1()
    tab = prestate_elimination(pre)
    for sid, edges in enumerate(pre.marked):
        for mark, pid in edges:
            assert set(tab.successors(sid, mark)) == set(pre.double[pid])
    x = pieces()
    mark = pre.space.index[x["chi0"]]
    roots = [s for s, m in enumerate(pre.states) if m & pre.root == pre.root]
    assert max(len(tab.successors(s, mark)) for s in roots) >= 2


def test_node_cap():
    with pytest.raises(ResourceLimitError):
        decide(parse(EX2, ABC), ABC, Options(max_nodes=3))


# -- elimination ------------------------------------------------------------------

def test_first_example_elimination():
    _, pre = example1()
    tab = eliminate(prestate_elimination(pre))
    assert not tab.is_open() and tab.alive_states() == []
    rules = [e.rule for e in tab.log]
    assert rules[0] == "E1" and "E3" in rules and rules[-1] == "E2"


def test_second_example_elimination():
    r = decide(parse(EX2, ABC), ABC, Options(split_conjuncts=True))
    assert r.satisfiable
    tab = r.tableau
    assert any(e.rule == "E1" for e in tab.log)
    assert not any(e.rule == "E3" for e in tab.log)
    xi = tab.space.index[parse("~C{a,c}p", ABC)]
    marked = mark_realized(tab, xi)
    for s in tab.alive_states():
        if tab.states[s] >> xi & 1:
            assert s in marked.rank


def test_marking_is_a_fixpoint_and_paths_are_sound():
    r = decide(parse(EX2, ABC), ABC)
    tab = r.tableau
    for xi in tab.eventuality_list:
        m1 = mark_realized(tab, xi)
        m2 = mark_realized(tab, xi)
        assert m1.rank == m2.rank and m1.step == m2.step
        goal = tab.space.fulfil[xi]
        for s in m1.rank:
            path = m1.path(s)
            end = path[-1][1] if path else s
            assert tab.states[end] & goal
            for mark, t in path:
                c = tab.space.coalition[mark]
                assert c & tab.space.coalition[xi] == c


def test_seed_marking_regardless_of_edges():
    r = decide(parse("~C{a,b}p & ~p", AB), AB)
    tab = r.tableau
    xi = tab.space.index[parse("~C{a,b}p", AB)]
    m = mark_realized(tab, xi)
    root = tab.root_state()
    assert m.rank[root] == 0


def test_e2_requires_all_successors_dead():
    theta = parse("~D{a}p", AB)
    space = LabelSpace([theta], AB)
    chi = space.index[theta]
    s0 = space.mask([theta])
    s1 = space.mask([Not(p)])
    s2 = space.mask([Not(p), Not(Not(Not(p)))]) if Not(Not(Not(p))) in space.index else s1 | 0
    tab = Tableau(space, s0, [s0, s1, s2], [[(chi, 1), (chi, 2)], [], []], [True, True, True])
    tab.alive[1] = False
    assert rule_e2(tab) == 0 and tab.alive[0]
    tab.alive[2] = False
    assert rule_e2(tab) == 1 and not tab.alive[0]
    assert tab.log[-1].rule == "E2" and tab.log[-1].witness is theta


def test_consistent_state_survives_e1():
    r = decide(parse("p & q", AB), AB)
    assert r.tableau.log == []


def _random_formulas(n, seed, max_size=10):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        u = AB if rng.random() < 0.5 else ABC
        out.append((random_formula(rng, u, ["p", "q"], max_size), u))
    return out


def test_log_replay_and_monotone_stages():
    for f, u in _random_formulas(150, 1):
        tab = decide(f, u).tableau
        assert tab.replay() == tab.alive
        ends = [n for _, n in tab.stages]
        assert ends == sorted(ends) and ends[-1] == len(tab.log)


def test_e2_schedule_does_not_change_final_tableau():
    for f, u in _random_formulas(150, 2):
        pre = build_pretableau(f, u)
        a = eliminate(prestate_elimination(pre))
        b = eliminate(prestate_elimination(pre), e2_fixpoint=False)
        assert a.alive == b.alive


def test_conjunct_split_agrees():
    for f, u in _random_formulas(200, 3):
        g = And(f, random_formula(random.Random(hash(str(f)) % 1000), u, ["p", "q"], 6))
        assert decide(g, u).satisfiable == decide(g, u, Options(split_conjuncts=True)).satisfiable


def test_repeated_runs_are_identical():
    theta = parse(EX2, ABC)
    a, b = decide(theta, ABC), decide(theta, ABC)
    assert a.pretableau.states == b.pretableau.states
    assert a.pretableau.prestates == b.pretableau.prestates
    assert a.tableau.log_json() == b.tableau.log_json()


def test_labels_within_extended_closure():
    for f, u in _random_formulas(50, 4):
        r = decide(f, u)
        ecl = set(extended_closure(f, u))
        for sid in range(len(r.pretableau.states)):
            label = r.pretableau.state_label(sid)
            assert set(label) <= ecl
            assert expansion_defect(label, u) is None


# -- validities and the published-procedure variants ----------------------------

@pytest.mark.parametrize("a, b", [
    (a, b) for a in ABC.coalitions() for b in ABC.coalitions() if b & a == b
])
def test_introspection_clause_for_subcoalitions(a, b):
    A, B = ",".join(ABC.members(a)), ",".join(ABC.members(b))
    f = parse(f"~(~D{{{A}}}~D{{{B}}}p -> D{{{B}}}p)", ABC)
    assert not decide(f, ABC).satisfiable


def test_literal_procedure_accepts_an_unsatisfiable_formula():
    # Without the cut the open tableau does not yield a Hintikka structure.
    theta = parse("~D{a}~C{a,b}p & ~C{a,b}p", AB)
    assert not decide(theta, AB).satisfiable
    r = decide(theta, AB, Options.literal())
    assert r.satisfiable
    structure, _ = extract_hintikka(r.tableau)
    assert verify_hintikka(structure).violation.condition == "H4"
    big, _ = disjoint_union(list(enumerate_pseudo_models(AB, 3, ["p"])))
    assert not BatchEvaluator(big).truth(theta).any()


@pytest.mark.parametrize("text", [
    "~C{a,b}p & D{a}p & ~D{a}(p & C{a,b}p)",
    "D{a}~C{a}p",
])
def test_literal_procedure_rejects_satisfiable_formulas(text):
    theta = parse(text, AB)
    assert decide(theta, AB).satisfiable
    assert not decide(theta, AB, Options.literal()).satisfiable
    big, _ = disjoint_union(list(enumerate_pseudo_models(AB, 3, ["p"])))
    assert BatchEvaluator(big).truth(theta).any()


def test_bits_helper():
    assert list(bits(0b10110)) == [1, 2, 4]
