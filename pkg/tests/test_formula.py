import pickle
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from cmael.formula import (
    And, Atom, C, D, FormulaSet, Not, ParseError, Universe,
    closure, conjuncts, extended_closure, is_eventuality, neg, parse, subformulas,
)

AB = Universe(["a", "b"])
ABC = Universe(["a", "b", "c"])
p, q = Atom("p"), Atom("q")


def formulas(universe, atoms=("p", "q", "r")):
    coalitions = [universe.members(m) for m in universe.coalitions()]
    leaf = st.sampled_from([Atom(a) for a in atoms])

    def extend(children):
        return st.one_of(
            children.map(Not),
            st.tuples(children, children).map(lambda lr: And(*lr)),
            st.tuples(st.sampled_from(coalitions), children).map(lambda x: D(*x)),
            st.tuples(st.sampled_from(coalitions), children).map(lambda x: C(*x)),
        )

    return st.recursive(leaf, extend, max_leaves=8)


def test_parse_common_knowledge_of_conjunction():
    assert parse("C{a,b}(p & q)", AB) == C(["a", "b"], And(p, q))


def test_parse_first_worked_example():
    theta = parse("~D{a,c} C{a,b} p & C{a,b}(p & q)", ABC)
    assert theta == And(Not(D("ac", C("ab", p))), C("ab", And(p, q)))


def test_k_is_individual_distributed_knowledge():
    assert parse("K a p", AB) is D(["a"], p)


def test_sugar_desugars_into_core():
    assert parse("p | q", AB) == Not(And(Not(p), Not(q)))
    assert parse("p -> q", AB) == Not(And(p, Not(q)))
    assert parse("p -> q -> p", AB) == parse("p -> (q -> p)", AB)
    assert parse("p <-> q", AB) == And(parse("p -> q", AB), parse("q -> p", AB))


def test_prefix_operators_bind_tighter_than_and():
    assert parse("~p & q", AB) == And(Not(p), q)
    assert parse("D{a}p & q", AB) == And(D("a", p), q)


def test_coalition_order_is_irrelevant():
    assert parse("D{b,a}p", AB) is parse("D{a,b}p", AB)


@pytest.mark.parametrize("text, needle", [
    ("D{x}p", "unknown agent"),
    ("D{}p", "empty coalition"),
    ("p &", "expected a formula"),
    ("(p", "expected ')'"),
    ("p q", "unexpected"),
    ("p $ q", "unexpected character"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ParseError) as info:
        parse(text, AB)
    assert needle in str(info.value)
    assert "^" in info.value.pretty()


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse("p & D{z}q", AB)
    assert info.value.pos == 6


def test_hash_consing_and_pickling():
    f = parse("C{a,b}(p & ~q)", AB)
    assert parse("C{a,b}(p & ~q)", AB) is f
    assert pickle.loads(pickle.dumps(f)) is f


def test_universe_validation():
    with pytest.raises(ValueError):
        Universe([])
    with pytest.raises(ValueError):
        Universe(["a", "a"])
    with pytest.raises(ValueError):
        Universe(["A"])
    with pytest.raises(ValueError):
        Universe([f"x{i}" for i in range(17)])
    with pytest.warns(UserWarning):
        Universe(["a"])


def test_closure_of_atom():
    assert closure(p, AB) == {p}


def test_closure_of_individual_knowledge():
    assert closure(D("a", p), AB) == {D("a", p), D("ab", p), p}


def test_closure_of_common_knowledge():
    c = C("ab", p)
    unfold = And(p, c)
    assert closure(c, AB) == {c, D("a", unfold), D("b", unfold), D("ab", unfold), unfold, p}


def test_extended_closure():
    assert extended_closure(p, AB) == {p, Not(p)}
    assert len(extended_closure(D("a", p), AB)) == 6


def test_single_negation():
    assert neg(Not(p)) is p
    assert neg(p) is Not(p)
    ecl = extended_closure(Not(Not(p)), AB)
    assert Not(Not(Not(p))) not in ecl


def test_is_eventuality():
    assert is_eventuality(Not(C("ab", p)))
    assert not is_eventuality(C("ab", p))
    assert not is_eventuality(Not(D("a", p)))


def test_conjuncts():
    f = parse("p & (q & p) & D{a}p", AB)
    assert conjuncts(f) == [p, q, D("a", p)]


def test_formula_set_is_canonical():
    a = FormulaSet([q, p, D("a", p)])
    b = FormulaSet([D("a", p), p, q, p])
    assert a == b and hash(a) == hash(b)
    assert list(a) == [p, q, D("a", p)]
    assert FormulaSet([p]) <= a


@settings(max_examples=300, deadline=None)
@given(formulas(ABC))
def test_print_parse_round_trip(f):
    assert parse(str(f), ABC) is f


@settings(max_examples=150, deadline=None)
@given(formulas(AB))
def test_closure_invariants(f):
    cl = closure(f, AB)
    for g in subformulas(f):
        assert g in cl
        assert closure(g, AB) <= cl
    for g in cl:
        assert closure(g, AB) <= cl
        if isinstance(g, D):
            for m in AB.supersets(AB.mask(g.agents)):
                assert D(AB.members(m), g.sub) in cl


def test_closure_is_finite_for_nested_common_knowledge():
    f = parse("C{a,b,c}~C{a,b}D{c}~C{b,c}p", ABC)
    assert 0 < len(extended_closure(f, ABC)) < 200


def test_no_warning_for_two_agents():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Universe(["a", "b"])
