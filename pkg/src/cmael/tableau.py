"""Incremental tableau: pretableau construction, prestate elimination, state elimination.

Labels of prestates and states are subsets of the extended closure of the
input.  Inside the engine they are ``int`` bitmasks over the positions of a
:class:`LabelSpace`; :class:`~cmael.formula.FormulaSet` is only built at the
API boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .formula import (
    And,
    C,
    D,
    Formula,
    FormulaSet,
    Not,
    Universe,
    conjuncts,
    extended_closure,
    is_eventuality,
    neg,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 1 << 20


class ResourceLimitError(RuntimeError):
    """Raised when the pretableau exceeds the configured node cap."""


@dataclass(frozen=True)
class Options:
    """Engine switches.

    ``introspection_cut`` makes every state decide each ``D{A'}f`` of the
    closure for which it carries some ``~D{A}g`` with ``A'`` a subset of ``A``.
    Without it a successor may hold a ``D{A'}f`` its predecessor lacks, which
    breaks H4 of the extracted structure.

    ``minimal_only`` keeps only minimal fully expanded extensions in SR.  The
    default keeps every saturation reached by branching on each ``~(f & g)``
    and ``~C`` clause, which is what eventuality witnesses need; the minimal
    variant can lose a witness path and declare a satisfiable formula closed.
    """

    max_nodes: int = DEFAULT_MAX_NODES
    split_conjuncts: bool = False
    introspection_cut: bool = True
    minimal_only: bool = False

    @classmethod
    def literal(cls, **kw) -> "Options":
        """Settings that follow the procedure exactly as published."""
        return cls(introspection_cut=False, minimal_only=True, **kw)


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class LabelSpace:
    """Indexes ecl(roots) and compiles the full-expansion clauses to bitmasks."""

    def __init__(self, roots: Iterable[Formula], universe: Universe, options: Options = Options()):
        self.roots = list(roots)
        self.universe = universe
        self.options = options
        self.ecl = extended_closure(self.roots, universe)
        self.formulas: list[Formula] = list(self.ecl)
        self.index = {f: i for i, f in enumerate(self.formulas)}
        n = len(self.formulas)

        bit = lambda f: 1 << self.index[f]  # noqa: E731
        self.coalition = [0] * n       # coalition mask of D/C formulas and of ~D/~C
        self.requires = [0] * n        # conjunctive consequences
        self.cuts: list[list[int]] = [[] for _ in range(n)]     # ~D{A}f: pairs {D{A'}g, ~D{A'}g}, A' inside A
        self.alternatives: list[list[int]] = [[] for _ in range(n)]  # ~(f & g) and ~C{A}f disjuncts
        self.fulfil = [0] * n          # ~C{A}f: bit of neg(f)
        self.complement = [0] * n      # bit of the negation when it lies in ecl
        self.dr_keep = [0] * n         # ~D{A}f: D/~D formulas with coalition inside A
        self.dr_seed = [0] * n         # ~D{A}f: bit of neg(f)
        self.eventualities = 0
        self.diamonds = 0              # ~D formulas, i.e. possible edge marks
        self.modal_d = 0               # D formulas and ~D formulas
        self.branching = 0             # formulas with a disjunctive full-expansion clause
        self.progress = 0              # ~C{A}f and ~(f & C{A}f): clauses that branch eagerly

        for i, f in enumerate(self.formulas):
            g = neg(f)
            if g in self.index:
                self.complement[i] = bit(g)
            if isinstance(f, (D, C)):
                self.coalition[i] = universe.mask(f.agents)
            elif isinstance(f, Not) and isinstance(f.sub, (D, C)):
                self.coalition[i] = universe.mask(f.sub.agents)
            if isinstance(f, D) or isinstance(f, Not) and isinstance(f.sub, D):
                self.modal_d |= 1 << i

        for i, f in enumerate(self.formulas):
            req = 0
            if isinstance(f, And):
                req |= bit(f.left) | bit(f.right)
            elif isinstance(f, D):
                req |= bit(f.sub)
                for m in universe.supersets(self.coalition[i]):
                    req |= bit(D(universe.members(m), f.sub))
            elif isinstance(f, C):
                unfolded = And(f.sub, f)
                for a in f.agents:
                    req |= bit(D([a], unfolded))
            elif isinstance(f, Not):
                g = f.sub
                if isinstance(g, Not):
                    req |= bit(g.sub)
                elif isinstance(g, And):
                    self.branching |= 1 << i
                    if isinstance(g.right, C) and g.right.sub is g.left:
                        self.progress |= 1 << i
                    self.alternatives[i] = list(dict.fromkeys([bit(neg(g.left)), bit(neg(g.right))]))
                elif isinstance(g, C):
                    self.eventualities |= 1 << i
                    self.branching |= 1 << i
                    self.progress |= 1 << i
                    unfolded = And(g.sub, g)
                    self.alternatives[i] = [
                        bit(Not(D([a], unfolded))) for a in universe.members(self.coalition[i])
                    ]
                    self.fulfil[i] = bit(neg(g.sub))
                elif isinstance(g, D):
                    self.diamonds |= 1 << i
                    self.dr_seed[i] = bit(neg(g.sub))
                    inner = g.sub
                    if isinstance(inner, Not) and isinstance(inner.sub, D):
                        b = universe.mask(inner.sub.agents)
                        if b & self.coalition[i] == b:
                            req |= bit(inner.sub)
            self.requires[i] = req & ~(1 << i)

        for i in bits(self.diamonds):
            a = self.coalition[i]
            keep = 0
            for j in bits(self.modal_d):
                if self.coalition[j] & a == self.coalition[j]:
                    keep |= 1 << j
            self.dr_keep[i] = keep
            if options.introspection_cut:
                for j, g in enumerate(self.formulas):
                    if isinstance(g, D) and self.coalition[j] & a == self.coalition[j]:
                        self.cuts[i].append((1 << j) | self.complement[j])

    # -- conversions -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.formulas)

    def mask(self, formulas: Iterable[Formula]) -> int:
        m = 0
        for f in formulas:
            try:
                m |= 1 << self.index[f]
            except KeyError:
                raise ValueError(f"{f} is not in the extended closure") from None
        return m

    def label(self, mask: int) -> FormulaSet:
        return FormulaSet(self.formulas[i] for i in bits(mask))

    def show(self, mask: int) -> str:
        return "{" + ", ".join(str(self.formulas[i]) for i in bits(mask)) + "}"

    # -- full expansion ----------------------------------------------------

    def close(self, mask: int) -> int:
        """Apply the conjunctive clauses to a fixpoint."""
        requires = self.requires
        todo = mask
        while todo:
            add = 0
            for i in bits(todo):
                add |= requires[i]
            todo = add & ~mask
            mask |= todo
        return mask

    def open_cut(self, mask: int) -> int:
        """First cut pair with neither member in ``mask`` (0 if none)."""
        for i in bits(mask & self.diamonds):
            for pair in self.cuts[i]:
                if not pair & mask:
                    return pair
        return 0

    def is_fully_expanded(self, mask: int) -> bool:
        """The full-expansion conditions proper; the cut is not part of them."""
        if self.close(mask) != mask:
            return False
        for i in bits(mask & self.branching):
            if not any(c & mask for c in self.alternatives[i]):
                return False
        return True

    def inconsistent(self, mask: int) -> bool:
        for i in bits(mask):
            if self.complement[i] & mask:
                return True
        return False

    def clash(self, mask: int) -> int | None:
        """Position of the first formula whose negation is also in ``mask``."""
        for i in bits(mask):
            if self.complement[i] & mask:
                return i
        return None

    def saturations(self, gamma: int, *, lazy: bool | None = None, cut: bool | None = None) -> list[int]:
        """Fully expanded extensions of ``gamma`` reached by deterministic branching.

        Each formula with a disjunctive clause is resolved once, branching
        over its alternatives in order (agent-id order for ``~C``).  In lazy
        mode a clause that already has an alternative present does not
        branch, which yields every minimal extension among the results.
        Otherwise the clauses that move an eventuality forward (``~C{A}f``
        and its unfolding ``~(f & C{A}f)``) branch even then, so a state can
        carry a disjunct that was not forced; eventuality witnesses depend
        on such states.  A ``~C`` clause whose body is already refuted in
        the set never needs another disjunct.  Other clauses and the cut
        pairs are always lazy, and a cut member that only leads to a patent
        clash is skipped when the other member does not.  Outside lazy mode
        a set that already clashes is completed along first alternatives
        only, since all its completions fall to rule E1 alike.
        """
        if lazy is None:
            lazy = self.options.minimal_only
        if cut is None:
            cut = self.options.introspection_cut
        results: dict[int, None] = {}
        seen: set[tuple[int, int]] = set()
        stack = [(gamma, 0)]
        while stack:
            mask, resolved = stack.pop()
            mask = self.close(mask)
            if (mask, resolved) in seen:
                continue
            seen.add((mask, resolved))
            if not lazy and self.inconsistent(mask):
                # Every completion is dead in E1; one representative suffices.
                results[self._first_completion(mask, resolved, cut)] = None
                continue
            pair = self.open_cut(mask) if cut else 0
            if pair:
                # A cut member that closes to a clash is dropped unless both do.
                options = [self.close(mask | 1 << i) for i in bits(pair)]
                keep = [m for m in options if not self.inconsistent(m)] or options
                for m in reversed(keep):
                    stack.append((m, resolved))
                continue
            pending = mask & self.branching & ~resolved
            if not pending:
                results[mask] = None
                continue
            i = (pending & -pending).bit_length() - 1
            alternatives = self.alternatives[i]
            present = [c for c in alternatives if c & mask]
            if present and (
                lazy or not self.progress >> i & 1 or len(present) == len(alternatives) or self.fulfil[i] & mask
            ):
                stack.append((mask, resolved | 1 << i))
                continue
            for c in reversed(alternatives):
                stack.append((mask | c, resolved | 1 << i))
        return list(results)

    def _first_completion(self, mask: int, resolved: int, cut: bool) -> int:
        while True:
            pair = self.open_cut(mask) if cut else 0
            if pair:
                mask = self.close(mask | pair & -pair)
                continue
            pending = mask & self.branching & ~resolved
            if not pending:
                return mask
            i = (pending & -pending).bit_length() - 1
            resolved |= 1 << i
            if not any(c & mask for c in self.alternatives[i]):
                mask = self.close(mask | self.alternatives[i][0])

    def minimal_extensions(self, gamma: int, *, cut: bool = False) -> list[int]:
        candidates = self.saturations(gamma, lazy=True, cut=cut)
        return [
            m for m in candidates
            if not any(o != m and o & m == o for o in candidates)
        ]

    def expansions(self, gamma: int) -> list[int]:
        """States that rule SR attaches to a prestate labelled ``gamma``."""
        if self.options.minimal_only:
            return self.minimal_extensions(gamma, cut=self.options.introspection_cut)
        return self.saturations(gamma)

    def dr_prestate(self, state: int, mark: int) -> int:
        return self.dr_seed[mark] | state & self.dr_keep[mark]


# ---------------------------------------------------------------------------
# Construction phase


@dataclass
class Pretableau:
    space: LabelSpace
    root: int                                           # mask the input must be contained in
    prestates: list[int] = field(default_factory=list)
    states: list[int] = field(default_factory=list)
    double: list[list[int]] = field(default_factory=list)               # prestate -> states
    marked: list[list[tuple[int, int]]] = field(default_factory=list)   # state -> (mark, prestate)
    _prestate_ids: dict[int, int] = field(default_factory=dict)
    _state_ids: dict[int, int] = field(default_factory=dict)
    _sr_done: set[int] = field(default_factory=set)
    _dr_done: set[int] = field(default_factory=set)

    @property
    def node_count(self) -> int:
        return len(self.prestates) + len(self.states)

    def _check_cap(self) -> None:
        cap = self.space.options.max_nodes
        if self.node_count > cap:
            raise ResourceLimitError(f"pretableau exceeded {cap} nodes")

    def add_prestate(self, label: int) -> tuple[int, bool]:
        pid = self._prestate_ids.get(label)
        if pid is not None:
            return pid, False
        pid = len(self.prestates)
        self.prestates.append(label)
        self.double.append([])
        self._prestate_ids[label] = pid
        self._check_cap()
        return pid, True

    def add_state(self, label: int) -> tuple[int, bool]:
        sid = self._state_ids.get(label)
        if sid is not None:
            return sid, False
        sid = len(self.states)
        self.states.append(label)
        self.marked.append([])
        self._state_ids[label] = sid
        self._check_cap()
        return sid, True

    def rule_sr(self, pid: int) -> list[int]:
        """Attach all expansions of prestate ``pid``; returns newly created states."""
        if pid in self._sr_done:
            return []
        self._sr_done.add(pid)
        created = []
        for label in self.space.expansions(self.prestates[pid]):
            sid, new = self.add_state(label)
            if sid not in self.double[pid]:
                self.double[pid].append(sid)
            if new:
                created.append(sid)
        return created

    def rule_dr(self, sid: int) -> list[int]:
        """Create (or reuse) one prestate per ``~D`` formula; returns new prestates."""
        label = self.states[sid]
        if sid in self._dr_done or self.space.inconsistent(label):
            return []
        self._dr_done.add(sid)
        created = []
        for mark in bits(label & self.space.diamonds):
            pid, new = self.add_prestate(self.space.dr_prestate(label, mark))
            self.marked[sid].append((mark, pid))
            if new:
                created.append(pid)
        return created

    def prestate_label(self, pid: int) -> FormulaSet:
        return self.space.label(self.prestates[pid])

    def state_label(self, sid: int) -> FormulaSet:
        return self.space.label(self.states[sid])

    def state_of(self, formulas: Iterable[Formula]) -> int | None:
        return self._state_ids.get(self.space.mask(formulas))

    def prestate_of(self, formulas: Iterable[Formula]) -> int | None:
        return self._prestate_ids.get(self.space.mask(formulas))


def root_formulas(theta: Formula | Iterable[Formula], options: Options) -> list[Formula]:
    if isinstance(theta, Formula):
        return conjuncts(theta) if options.split_conjuncts else [theta]
    return list(dict.fromkeys(theta))


def build_pretableau(
    theta: Formula | Iterable[Formula],
    universe: Universe,
    options: Options = Options(),
) -> Pretableau:
    """Start from the single prestate {theta} (or the conjunct set) and
    alternate SR over new prestates with DR over new states until quiescent."""
    roots = root_formulas(theta, options)
    space = LabelSpace(roots, universe, options)
    root = space.mask(roots)
    pre = Pretableau(space, root)
    new_prestates = [pre.add_prestate(root)[0]]
    while new_prestates:
        new_states = []
        for pid in new_prestates:
            new_states.extend(pre.rule_sr(pid))
        new_prestates = []
        for sid in new_states:
            new_prestates.extend(pre.rule_dr(sid))
    log.debug("pretableau: %d prestates, %d states, |ecl|=%d",
              len(pre.prestates), len(pre.states), len(space))
    return pre


# ---------------------------------------------------------------------------
# Prestate and state elimination


@dataclass(frozen=True)
class Elimination:
    state: int
    rule: str
    witness: Formula


@dataclass
class Tableau:
    space: LabelSpace
    root: int
    states: list[int]
    edges: list[list[tuple[int, int]]]       # state -> (mark, state), deduplicated
    alive: list[bool]
    log: list[Elimination] = field(default_factory=list)
    eventuality_list: list[int] = field(default_factory=list)
    stages: list[tuple[str, int]] = field(default_factory=list)   # (rule step, log length after it)
    node_count: int = 0

    def alive_states(self) -> list[int]:
        return [s for s, ok in enumerate(self.alive) if ok]

    def label(self, sid: int) -> FormulaSet:
        return self.space.label(self.states[sid])

    def successors(self, sid: int, mark: int) -> list[int]:
        return [t for m, t in self.edges[sid] if m == mark]

    def eliminate(self, sid: int, rule: str, witness: int) -> None:
        assert self.alive[sid]
        self.alive[sid] = False
        self.log.append(Elimination(sid, rule, self.space.formulas[witness]))

    def replay(self) -> list[bool]:
        alive = [True] * len(self.states)
        for entry in self.log:
            if not alive[entry.state]:
                raise AssertionError(f"state {entry.state} eliminated twice")
            alive[entry.state] = False
        return alive

    def is_open(self) -> bool:
        return self.root_state() is not None

    def root_state(self) -> int | None:
        """Least-indexed alive state containing the input."""
        for s, label in enumerate(self.states):
            if self.alive[s] and label & self.root == self.root:
                return s
        return None

    def log_json(self) -> list[dict]:
        return [{"state": e.state, "rule": e.rule, "witness": str(e.witness)} for e in self.log]


def prestate_elimination(pre: Pretableau) -> Tableau:
    """Rule PR: route each marked edge into a prestate to every state of that prestate."""
    edges: list[list[tuple[int, int]]] = []
    for sid in range(len(pre.states)):
        out: dict[tuple[int, int], None] = {}
        for mark, pid in pre.marked[sid]:
            for target in pre.double[pid]:
                out[(mark, target)] = None
        edges.append(list(out))
    return Tableau(
        space=pre.space,
        root=pre.root,
        states=list(pre.states),
        edges=edges,
        alive=[True] * len(pre.states),
        node_count=pre.node_count,
    )


@dataclass
class Marking:
    """Result of the realization marking for one eventuality.

    ``rank[s]`` is the round in which ``s`` got marked (0 for states holding
    the negated body) and ``step[s]`` the (mark, successor) edge used.
    """

    eventuality: int
    rank: dict[int, int]
    step: dict[int, tuple[int, int]]

    @property
    def marked(self) -> set[int]:
        return set(self.rank)

    def path(self, sid: int) -> list[tuple[int, int]]:
        """Witness path from ``sid`` as (mark, next state) pairs."""
        out = []
        while self.rank[sid] > 0:
            mark, sid = self.step[sid]
            out.append((mark, sid))
        return out


def mark_realized(tab: Tableau, xi: int) -> Marking:
    """Least fixpoint of states realizing eventuality ``xi`` among alive states."""
    space = tab.space
    target = space.fulfil[xi]
    coalition = space.coalition[xi]
    rank: dict[int, int] = {}
    step: dict[int, tuple[int, int]] = {}
    for s in tab.alive_states():
        if tab.states[s] & target:
            rank[s] = 0
    admissible = [
        s for s in tab.alive_states() if s not in rank
    ]
    round_no = 0
    while True:
        round_no += 1
        fresh = {}
        for s in admissible:
            if s in rank:
                continue
            best = None
            for mark, t in tab.edges[s]:
                if t in rank and tab.alive[t] and space.coalition[mark] & coalition == space.coalition[mark]:
                    key = (rank[t], t, mark)
                    if best is None or key < best:
                        best = key
            if best is not None:
                fresh[s] = (best[2], best[1])
        if not fresh:
            break
        for s, edge in fresh.items():
            rank[s] = round_no
            step[s] = edge
        admissible = [s for s in admissible if s not in rank]
    return Marking(xi, rank, step)


def rule_e1(tab: Tableau) -> None:
    for s in tab.alive_states():
        i = tab.space.clash(tab.states[s])
        if i is not None:
            tab.eliminate(s, "E1", i)


def rule_e2(tab: Tableau, to_fixpoint: bool = True) -> int:
    """Eliminate states that lost every successor along some mark."""
    removed = 0
    changed = True
    space = tab.space
    while changed:
        changed = False
        if removed and not to_fixpoint:
            break
        for s in tab.alive_states():
            for mark in bits(tab.states[s] & space.diamonds):
                if not any(tab.alive[t] for m, t in tab.edges[s] if m == mark):
                    tab.eliminate(s, "E2", mark)
                    removed += 1
                    changed = True
                    break
    return removed


def rule_e3(tab: Tableau, xi: int, marking: Marking | None = None) -> int:
    if marking is None:
        marking = mark_realized(tab, xi)
    removed = 0
    for s in tab.alive_states():
        if tab.states[s] >> xi & 1 and s not in marking.rank:
            tab.eliminate(s, "E3", xi)
            removed += 1
    return removed


def collect_eventualities(tab: Tableau) -> list[int]:
    seen: dict[int, None] = {}
    for s in tab.alive_states():
        for i in bits(tab.states[s] & tab.space.eventualities):
            seen.setdefault(i, None)
    return list(seen)


def eliminate(tab: Tableau, e2_fixpoint: bool = True) -> Tableau:
    """E1 once, then cycles of (E3 on the pending eventuality, E2) until a
    whole cycle removes nothing.  E2 runs to its own fixpoint unless
    ``e2_fixpoint`` is false, in which case it makes a single pass."""
    def stage(name: str) -> None:
        tab.stages.append((name, len(tab.log)))

    rule_e1(tab)
    stage("E1")
    tab.eventuality_list = collect_eventualities(tab)
    if not tab.eventuality_list:
        while rule_e2(tab, e2_fixpoint):
            pass
        stage("E2")
        return tab
    while True:
        removed = 0
        for xi in tab.eventuality_list:
            removed += rule_e3(tab, xi)
            stage(f"E3 {tab.space.formulas[xi]}")
            removed += rule_e2(tab, e2_fixpoint)
            stage("E2")
        if not removed:
            return tab


@dataclass
class Result:
    satisfiable: bool
    pretableau: Pretableau
    tableau: Tableau

    @property
    def verdict(self) -> str:
        return "SAT" if self.satisfiable else "UNSAT"

    @property
    def node_count(self) -> int:
        return self.pretableau.node_count


def decide(
    theta: Formula | Iterable[Formula],
    universe: Universe,
    options: Options = Options(),
) -> Result:
    pre = build_pretableau(theta, universe, options)
    tab = eliminate(prestate_elimination(pre))
    return Result(tab.is_open(), pre, tab)


def is_fully_expanded(delta: Iterable[Formula], universe: Universe, options: Options = Options()) -> bool:
    """Full-expansion test for a standalone set, over the closure of the set itself."""
    delta = list(delta)
    space = LabelSpace(delta, universe, options)
    return space.is_fully_expanded(space.mask(delta))


def minimal_fully_expanded_extensions(
    gamma: Iterable[Formula], universe: Universe, options: Options = Options()
) -> list[FormulaSet]:
    gamma = list(gamma)
    space = LabelSpace(gamma, universe, options)
    return [space.label(m) for m in space.minimal_extensions(space.mask(gamma))]


__all__ = [
    "Options",
    "LabelSpace",
    "Pretableau",
    "Tableau",
    "Elimination",
    "Marking",
    "Result",
    "ResourceLimitError",
    "build_pretableau",
    "prestate_elimination",
    "mark_realized",
    "rule_e1",
    "rule_e2",
    "rule_e3",
    "eliminate",
    "decide",
    "is_fully_expanded",
    "minimal_fully_expanded_extensions",
    "is_eventuality",
]
