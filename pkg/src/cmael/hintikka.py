"""Hintikka structures: extraction from an open tableau, verification of
H1-H5, and conversion into a pseudo-model."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .formula import And, C, D, Formula, FormulaSet, Not, Universe, neg, sort_key
from .kripke import PseudoModel, equivalence_closure, reflexive_transitive_closure
from .semantics import EvalContext, satisfies
from .tableau import Marking, Tableau, bits, mark_realized


class ExtractionError(RuntimeError):
    """The final tableau does not support the construction (an engine bug)."""


@dataclass
class HintikkaStructure:
    universe: Universe
    labels: dict[int, FormulaSet]
    relations: dict[int, frozenset[tuple[int, int]]]   # coalition mask -> R^D
    root: int | None = None
    origin: dict[int, int] = field(default_factory=dict)  # node -> tableau state
    _common: dict[int, dict[int, set[int]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for m in self.universe.coalitions():
            self.relations.setdefault(m, frozenset())

    @property
    def states(self) -> list[int]:
        return list(self.labels)

    def successors(self, mask: int, s: int) -> list[int]:
        return sorted(t for a, t in self.relations[mask] if a == s)

    def common(self, mask: int) -> dict[int, set[int]]:
        """R^C for the coalition: reflexive-transitive closure of the union
        of R^D over its nonempty subcoalitions."""
        table = self._common.get(mask)
        if table is None:
            union = set()
            for sub in self.universe.subsets(mask):
                union |= self.relations[sub]
            table = {s: set() for s in self.labels}
            for a, b in reflexive_transitive_closure(self.labels, union):
                table[a].add(b)
            self._common[mask] = table
        return table


@dataclass
class TreeComponent:
    key: tuple[int, int]                                   # (tableau state, eventuality index)
    eventuality: Formula | None
    nodes: list[tuple[int, int]]                           # (node, tableau state), spine first
    edges: list[tuple[int, Formula, int]]                  # interior (node, mark, node)
    leaves: list[tuple[int, Formula, int]]                 # (node, mark, tableau state of the leaf)

    @property
    def root(self) -> int:
        return self.nodes[0][0]


# ---------------------------------------------------------------------------
# Extraction


class _Builder:
    def __init__(self, tab: Tableau):
        self.tab = tab
        self.space = tab.space
        self.events = list(tab.eventuality_list)
        self.markings: dict[int, Marking] = {xi: mark_realized(tab, xi) for xi in self.events}
        self.labels: dict[int, FormulaSet] = {}
        self.origin: dict[int, int] = {}
        self.pairs: dict[int, set[tuple[int, int]]] = {}
        self.components: dict[tuple[int, int], TreeComponent] = {}

    def new_node(self, state: int) -> int:
        node = len(self.labels)
        self.labels[node] = self.tab.label(state)
        self.origin[node] = state
        return node

    def pick(self, state: int, mark: int) -> int:
        targets = [t for t in self.tab.successors(state, mark) if self.tab.alive[t]]
        if not targets:
            raise ExtractionError(f"state {state} lost its successors for {self.space.formulas[mark]}")
        return min(targets)

    def component(self, state: int, k: int) -> TreeComponent:
        xi = self.events[k] if self.events else None
        spine = [(None, state)]
        if xi is not None and self.tab.states[state] >> xi & 1:
            marking = self.markings[xi]
            if state not in marking.rank:
                raise ExtractionError(f"eventuality {self.space.formulas[xi]} unrealized at state {state}")
            spine += marking.path(state)
        nodes, edges, leaves = [], [], []
        prev = None
        for i, (_, s) in enumerate(spine):
            node = self.new_node(s)
            nodes.append((node, s))
            if prev is not None:
                edges.append((prev, self.space.formulas[spine[i][0]], node))
            prev = node
        for i, (node, s) in enumerate(nodes):
            used = spine[i + 1][0] if i + 1 < len(spine) else None
            for mark in bits(self.tab.states[s] & self.space.diamonds):
                if mark != used:
                    leaves.append((node, self.space.formulas[mark], self.pick(s, mark)))
        return TreeComponent(
            (state, k), None if xi is None else self.space.formulas[xi], nodes, edges, leaves
        )

    def link(self, a: int, mark: Formula, b: int) -> None:
        mask = self.space.universe.mask(mark.sub.agents)
        self.pairs.setdefault(mask, set()).add((a, b))

    def check_stitching(self, comp: TreeComponent) -> None:
        """An eventuality of the root that the component does not realize
        internally must be carried into some leaf."""
        u = self.space.universe
        root_label = self.labels[comp.root]
        inside = {n for n, _ in comp.nodes}
        for f in root_label:
            if not (isinstance(f, Not) and isinstance(f.sub, C)):
                continue
            mask = u.mask(f.sub.agents)
            goal = neg(f.sub.sub)
            reach = {comp.root}
            todo = [comp.root]
            frontier_leaves = []
            while todo:
                n = todo.pop()
                for a, mark, b in comp.edges:
                    if a == n and b not in reach and _inside(u, mark, mask):
                        reach.add(b)
                        todo.append(b)
            if any(goal in self.labels[n] for n in reach if n in inside):
                continue
            for a, mark, t in comp.leaves:
                if a in reach and _inside(u, mark, mask):
                    frontier_leaves.append(t)
            if not any(f in self.tab.label(t) or goal in self.tab.label(t) for t in frontier_leaves):
                raise ExtractionError(
                    f"eventuality {f} neither realized in component {comp.key} nor passed to a leaf"
                )

    def run(self, start: int) -> tuple[HintikkaStructure, list[TreeComponent]]:
        m = max(len(self.events), 1)
        order: list[TreeComponent] = []
        queue = deque([(start, 0)])
        roots: dict[tuple[int, int], int] = {}
        while queue:
            key = queue.popleft()
            if key in self.components:
                continue
            comp = self.component(*key)
            self.components[key] = comp
            roots[key] = comp.root
            order.append(comp)
            self.check_stitching(comp)
            for a, mark, b in comp.edges:
                self.link(a, mark, b)
            for _, _, t in comp.leaves:
                nxt = (t, (key[1] + 1) % m)
                if nxt not in self.components:
                    queue.append(nxt)
        for comp in order:
            for a, mark, t in comp.leaves:
                self.link(a, mark, roots[(t, (comp.key[1] + 1) % m)])
        relations = {mask: frozenset(p) for mask, p in self.pairs.items()}
        structure = HintikkaStructure(
            self.space.universe, self.labels, relations, root=roots[(start, 0)], origin=self.origin
        )
        return structure, order


def _inside(u: Universe, mark: Formula, mask: int) -> bool:
    m = u.mask(mark.sub.agents)
    return m & mask == m


def extract_hintikka(tab: Tableau) -> tuple[HintikkaStructure, list[TreeComponent]]:
    """Stitch final tree components into a finite Hintikka structure.

    Components are memoised per (state, eventuality index); each leaf is
    redirected to the root of the component for its state and the next
    eventuality in the cyclic queue, so the result is finite.
    """
    start = tab.root_state()
    if start is None:
        raise ExtractionError("tableau is closed")
    return _Builder(tab).run(start)


def build_component(tab: Tableau, state: int, k: int) -> TreeComponent:
    """The tree component rooted at ``state`` for eventuality number ``k``."""
    if not tab.alive[state]:
        raise ExtractionError(f"state {state} is not in the final tableau")
    return _Builder(tab).component(state, k)


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class Violation:
    condition: str
    state: int
    formula: Formula | None
    detail: str = ""

    def __str__(self) -> str:
        where = f" at {self.state}" + (f" on {self.formula}" if self.formula is not None else "")
        return f"{self.condition}{where}" + (f": {self.detail}" if self.detail else "")


@dataclass(frozen=True)
class HintikkaReport:
    violation: Violation | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "pass" if self.ok else f"fail: {self.violation}"


def _requirements(f: Formula, universe: Universe) -> tuple[tuple[Formula, ...], tuple[Formula, ...]]:
    """What the full-expansion conditions demand of a set containing ``f``:
    every formula of the first tuple, and one of the second when nonempty.

    The intersection clause is taken in the form that is valid: from
    ``~D{A}~D{B}g`` with ``B`` a subset of ``A`` it demands ``D{B}g``.
    """
    if isinstance(f, And):
        return (f.left, f.right), ()
    if isinstance(f, D):
        ups = tuple(D(universe.members(m), f.sub) for m in universe.supersets(universe.mask(f.agents)))
        return (f.sub, *ups), ()
    if isinstance(f, C):
        return tuple(D([a], And(f.sub, f)) for a in f.agents), ()
    if isinstance(f, Not):
        g = f.sub
        if isinstance(g, Not):
            return (g.sub,), ()
        if isinstance(g, And):
            return (), (neg(g.left), neg(g.right))
        if isinstance(g, C):
            return (), tuple(Not(D([a], And(g.sub, g))) for a in g.agents)
        if isinstance(g, D) and isinstance(g.sub, Not) and isinstance(g.sub.sub, D):
            inner = g.sub.sub
            if set(inner.agents) <= set(g.agents):
                return (inner,), ()
    return (), ()


class _Memo(dict):
    """Per-universe table of a pure function of formulas."""

    def __init__(self, fn, universe):
        super().__init__()
        self.fn = fn
        self.universe = universe

    def __missing__(self, f):
        value = self[f] = self.fn(f, self.universe)
        return value


_TABLES: dict[tuple, _Memo] = {}


def _table(fn, universe: Universe) -> _Memo:
    key = (fn.__name__, universe.names)
    memo = _TABLES.get(key)
    if memo is None:
        memo = _TABLES[key] = _Memo(fn, universe)
    return memo


def expansion_defect(delta: FormulaSet | frozenset, universe: Universe) -> tuple[Formula, str] | None:
    """First full-expansion condition violated by ``delta``, if any."""
    requirements = _table(_requirements, universe)
    for f in delta:
        needed, options = requirements[f]
        for g in needed:
            if g not in delta:
                return f, f"{g} missing"
        if options and not any(g in delta for g in options):
            return f, "none of " + ", ".join(map(str, options))
    return None


def _shape(f: Formula, universe: Universe) -> tuple[str, int, Formula | None]:
    """(kind, coalition mask, target) where kind is "box" for D, "diamond"
    for ~D and "event" for ~C; the target is the single negation of the body."""
    if isinstance(f, D):
        return "box", universe.mask(f.agents), None
    if isinstance(f, Not) and isinstance(f.sub, D):
        return "diamond", universe.mask(f.sub.agents), neg(f.sub.sub)
    if isinstance(f, Not) and isinstance(f.sub, C):
        return "event", universe.mask(f.sub.agents), neg(f.sub.sub)
    return "", 0, None


def verify_hintikka(S: HintikkaStructure) -> HintikkaReport:
    """Check H1-H5 in order and report the first violation found.

    In H3 and H5 the required formula is the single negation of the body,
    so it stays inside an extended closure.
    """
    u = S.universe
    for s, label in S.labels.items():
        for f in label:
            if isinstance(f, Not) and f.sub in label:
                return HintikkaReport(Violation("H1", s, f, "complementary pair"))
    for s, label in S.labels.items():
        bad = expansion_defect(label, u)
        if bad:
            return HintikkaReport(Violation("H2", s, bad[0], bad[1]))
    shape = _table(_shape, u)
    shapes = {}
    for s, label in S.labels.items():
        shapes[s] = [(f, *shape[f]) for f in label if shape[f][0]]
    succ = {m: {s: [] for s in S.labels} for m in u.coalitions()}
    for m, pairs in S.relations.items():
        for a, b in sorted(pairs):
            succ[m][a].append(b)
    for s in S.labels:
        for f, kind, m, goal in shapes[s]:
            if kind == "diamond" and not any(goal in S.labels[t] for t in succ[m][s]):
                return HintikkaReport(Violation("H3", s, f, "no successor with the negated body"))
    # D formulas of each label, grouped by the coalitions that contain theirs
    coalitions = u.coalitions()
    boxes = {}
    for s in S.labels:
        by_c: dict[int, list[Formula]] = {}
        for f, kind, c, _ in shapes[s]:
            if kind == "box":
                by_c.setdefault(c, []).append(f)
        boxes[s] = {
            m: frozenset(f for c, fs in by_c.items() if c & m == c for f in fs) for m in coalitions
        }
    for m in coalitions:
        for s, t in sorted(S.relations[m]):
            if boxes[s][m] != boxes[t][m]:
                x, y = (s, t) if boxes[s][m] - boxes[t][m] else (t, s)
                f = min(boxes[x][m] - boxes[y][m], key=sort_key)
                return HintikkaReport(Violation("H4", x, f, f"missing at {y} across R^D[{u.key(m)}]"))
    for s in S.labels:
        for f, kind, m, goal in shapes[s]:
            if kind == "event" and not any(goal in S.labels[t] for t in S.common(m)[s]):
                return HintikkaReport(Violation("H5", s, f, "no reachable state with the negated body"))
    return HintikkaReport()


# ---------------------------------------------------------------------------
# Conversion


def hintikka_to_pseudo_model(S: HintikkaStructure) -> PseudoModel:
    """``R'^D_A`` is the equivalence closure of the union of ``R^D_B`` over
    all supersets ``B`` of ``A``; atoms are read off the labels."""
    u = S.universe
    states = sorted(S.labels)
    relations = {}
    for m in u.coalitions():
        union = set()
        for b in u.supersets(m):
            union |= S.relations[b]
        relations[m] = equivalence_closure(states, union)
    labeling = {s: tuple(sorted(f.name for f in S.labels[s] if f.size == 1)) for s in states}
    return PseudoModel(u, states, labeling, relations, root=S.root)


def structure_from_model(model: PseudoModel, labels: dict[int, FormulaSet]) -> HintikkaStructure:
    """Pair a model's relations with a labeling (used for extended labelings)."""
    return HintikkaStructure(model.universe, dict(labels), dict(model.relations), root=model.root)


def truth_preservation_failures(
    S: HintikkaStructure, model: PseudoModel, formulas: Iterable[Formula] | None = None
) -> list[tuple[int, Formula]]:
    """Pairs (state, f) with f in the label but false in the model.

    With ``formulas`` given, only those members of each label are checked.
    """
    ctx = EvalContext(model)
    wanted = None if formulas is None else set(formulas)
    out = []
    for s, label in S.labels.items():
        for f in label:
            if wanted is not None and f not in wanted:
                continue
            if not satisfies(model, s, f, ctx):
                out.append((s, f))
    return out


__all__ = [
    "HintikkaStructure",
    "TreeComponent",
    "HintikkaReport",
    "Violation",
    "ExtractionError",
    "extract_hintikka",
    "build_component",
    "verify_hintikka",
    "expansion_defect",
    "hintikka_to_pseudo_model",
    "structure_from_model",
    "truth_preservation_failures",
]
