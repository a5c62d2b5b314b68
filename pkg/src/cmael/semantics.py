"""Model checking over finite (pseudo-)models, frame classification,
extended labelings and exhaustive enumeration of small pseudo-models."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .formula import And, Atom, C, D, Formula, FormulaSet, Not, Universe
from .kripke import PseudoModel, reflexive_transitive_closure


class EvaluationError(ValueError):
    pass


@dataclass
class EvalContext:
    """Memo table for one model.

    ``common`` selects how ``C{A}`` is evaluated: ``"reach"`` walks the
    individual relations of the members of ``A``; ``"closure"`` uses the
    reflexive-transitive closure of the union of ``R^D`` over all nonempty
    subcoalitions of ``A``.
    """

    model: PseudoModel
    common: str = "reach"
    memo: dict[tuple[int, Formula], bool] = field(default_factory=dict)
    _closure: dict[int, dict[int, set[int]]] = field(default_factory=dict)
    _groups: dict[int, dict[int, tuple[int, tuple[int, ...]]]] = field(default_factory=dict)

    def coalition(self, agents: Sequence[str]) -> int:
        try:
            return self.model.universe.mask(agents)
        except ValueError as exc:
            raise EvaluationError(str(exc)) from None

    def reach_group(self, s: int, mask: int) -> tuple[int, tuple[int, ...]]:
        """(group id, states reachable from ``s`` via members of ``mask``).

        States with the same reachable set share a group id.  When every
        member relation is symmetric the groups are connected components.
        """
        table = self._groups.get(mask)
        if table is None:
            table = self._groups[mask] = self._build_groups(mask)
        return table[s]

    def _build_groups(self, mask: int) -> dict[int, tuple[int, tuple[int, ...]]]:
        model = self.model
        singles = model.universe.singletons(mask)
        pairs = set().union(*(model.relations[a] for a in singles))
        if all((t, s) in pairs for s, t in pairs):
            parent = {s: s for s in model.states}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for a, b in pairs:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            members: dict[int, list[int]] = {}
            for x in model.states:
                members.setdefault(find(x), []).append(x)
            groups = {r: (r, tuple(sorted(xs))) for r, xs in members.items()}
            return {x: groups[find(x)] for x in model.states}
        n = len(model.states)
        return {x: (n + i, tuple(sorted(a_reachable(model, x, mask)))) for i, x in enumerate(model.states)}

    def common_targets(self, s: int, mask: int) -> Iterable[int]:
        if self.common == "reach":
            return self.reach_group(s, mask)[1]
        table = self._closure.get(mask)
        if table is None:
            u = self.model.universe
            union = set()
            for sub in u.subsets(mask):
                union |= self.model.relations[sub]
            table = {t: set() for t in self.model.states}
            for a, b in reflexive_transitive_closure(self.model.states, union):
                table[a].add(b)
            self._closure[mask] = table
        return table[s]


def a_reachable(model: PseudoModel, s: int, coalition: int | Iterable[str]) -> set[int]:
    """States reachable from ``s`` by finitely many steps along ``R^D_a``, ``a`` in the coalition."""
    u = model.universe
    mask = coalition if isinstance(coalition, int) else u.mask(coalition)
    singles = u.singletons(mask)
    seen = {s}
    stack = [s]
    while stack:
        x = stack.pop()
        for a in singles:
            for y in model.successors(a, x):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
    return seen


def satisfies(model: PseudoModel, s: int, phi: Formula, ctx: EvalContext | None = None) -> bool:
    if ctx is None:
        ctx = EvalContext(model)
    elif ctx.model is not model:
        raise EvaluationError("evaluation context belongs to another model")
    if s not in model.labeling:
        raise EvaluationError(f"unknown state {s}")
    return _eval(ctx, s, phi)


def _eval(ctx: EvalContext, s: int, f: Formula) -> bool:
    key = (s, f)
    hit = ctx.memo.get(key)
    if hit is not None:
        return hit
    if isinstance(f, Atom):
        value = ctx.model.holds_atom(s, f.name)
    elif isinstance(f, Not):
        value = not _eval(ctx, s, f.sub)
    elif isinstance(f, And):
        value = _eval(ctx, s, f.left) and _eval(ctx, s, f.right)
    elif isinstance(f, D):
        m = ctx.coalition(f.agents)
        value = all(_eval(ctx, t, f.sub) for t in ctx.model.successors(m, s))
    elif isinstance(f, C):
        m = ctx.coalition(f.agents)
        if ctx.common == "reach":
            group, targets = ctx.reach_group(s, m)
            gkey = (-1 - group, f)
            value = ctx.memo.get(gkey)
            if value is None:
                value = ctx.memo[gkey] = all(_eval(ctx, t, f.sub) for t in targets)
        else:
            value = all(_eval(ctx, t, f.sub) for t in sorted(ctx.common_targets(s, m)))
    else:
        raise EvaluationError(f"not a formula: {f!r}")
    ctx.memo[key] = value
    return value


def truth_set(model: PseudoModel, phi: Formula, ctx: EvalContext | None = None) -> list[int]:
    ctx = ctx or EvalContext(model)
    return [s for s in model.states if satisfies(model, s, phi, ctx)]


# ---------------------------------------------------------------------------
# Frames


@dataclass(frozen=True)
class FrameReport:
    kind: str                     # "CMAEF", "pseudo-CMAEF" or "invalid"
    witness: str | None = None    # why the next stronger class fails

    @property
    def at_least_pseudo(self) -> bool:
        return self.kind != "invalid"


def equivalence_defect(states: Sequence[int], rel: frozenset) -> str | None:
    for s in states:
        if (s, s) not in rel:
            return f"not reflexive at {s}"
    for s, t in sorted(rel):
        if (t, s) not in rel:
            return f"not symmetric on {(s, t)}"
    # Reflexive and symmetric: transitive iff related states see the same set.
    succ: dict[int, set[int]] = {s: set() for s in states}
    for s, t in rel:
        succ[s].add(t)
    ids: dict[frozenset, int] = {}
    cls = {s: ids.setdefault(frozenset(succ[s]), len(ids)) for s in states}
    for s, t in sorted(rel):
        if cls[s] != cls[t]:
            extra = succ[t] - succ[s]
            if extra:
                return f"not transitive on {(s, t)}, {(t, min(extra))}"
            return f"not transitive on {(t, s)}, {(s, min(succ[s] - succ[t]))}"
    return None


def validate_frame(model: PseudoModel) -> FrameReport:
    u = model.universe
    rel = model.relations
    for m in u.coalitions():
        problem = equivalence_defect(model.states, rel[m])
        if problem:
            return FrameReport("invalid", f"R^D[{u.key(m)}] {problem}")
    for a in u.coalitions():
        for b in u.subsets(a):
            extra = rel[a] - rel[b]
            if extra:
                return FrameReport("invalid", f"R^D[{u.key(a)}] not inside R^D[{u.key(b)}]: {min(extra)}")
    for m in u.coalitions():
        meet = None
        for a in u.singletons(m):
            meet = rel[a] if meet is None else meet & rel[a]
        if meet != rel[m]:
            pair = min(meet ^ rel[m])
            return FrameReport("pseudo-CMAEF", f"R^D[{u.key(m)}] differs from the intersection at {pair}")
    return FrameReport("CMAEF")


def extended_labeling(
    model: PseudoModel,
    ecl: Iterable[Formula],
    ctx: EvalContext | None = None,
    evaluator: "BatchEvaluator | None" = None,
) -> dict[int, FormulaSet]:
    """Per state, the members of ``ecl`` true there.

    A :class:`BatchEvaluator` for the same model may be passed to compute
    the truth values in bulk.
    """
    ordered = isinstance(ecl, FormulaSet)
    ecl = list(ecl)
    if evaluator is not None:
        if evaluator.model is not model:
            raise EvaluationError("evaluator belongs to another model")
        true: dict[int, list[Formula]] = {s: [] for s in model.states}
        for f in ecl:
            for i in np.flatnonzero(evaluator.truth(f)):
                true[model.states[i]].append(f)
        make = FormulaSet.presorted if ordered else FormulaSet
        return {s: make(fs) for s, fs in true.items()}
    ctx = ctx or EvalContext(model)
    return {s: FormulaSet(f for f in ecl if satisfies(model, s, f, ctx)) for s in model.states}


# ---------------------------------------------------------------------------
# Enumeration of small pseudo-models


def _partitions(n: int) -> list[tuple[int, ...]]:
    """Set partitions of range(n) as restricted growth strings."""
    out = []

    def grow(prefix, top):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for b in range(top + 2):
            grow(prefix + [b], max(top, b))

    grow([], -1)
    return out


def _normalize(blocks: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(b, len(seen)) for b in blocks)


def _refines(p: Sequence[int], q: Sequence[int]) -> bool:
    n = len(p)
    return all(q[i] == q[j] for i in range(n) for j in range(i + 1, n) if p[i] == p[j])


def enumerate_frames(universe: Universe, n: int) -> list[dict[int, tuple[int, ...]]]:
    """Pseudo-frames on ``n`` states up to renaming of states.

    Each frame maps a coalition mask to a partition (the classes of its
    equivalence relation); larger coalitions refine smaller ones.
    """
    parts = _partitions(n)
    order = universe.coalitions()
    frames: dict[tuple, dict[int, tuple[int, ...]]] = {}

    def extend(i, chosen):
        if i == len(order):
            canon = min(
                tuple(_normalize([chosen[m][perm[k]] for k in range(n)]) for m in order)
                for perm in permutations(range(n))
            )
            if canon not in frames:
                frames[canon] = dict(zip(order, canon))
            return
        m = order[i]
        for p in parts:
            if all(_refines(p, chosen[b]) for b in chosen if b & m == b):
                chosen[m] = p
                extend(i + 1, chosen)
                del chosen[m]

    extend(0, {})
    return [frames[k] for k in sorted(frames)]


def frame_relations(blocks: dict[int, tuple[int, ...]], offset: int = 0) -> dict[int, frozenset]:
    out = {}
    for m, p in blocks.items():
        n = len(p)
        out[m] = frozenset((i + offset, j + offset) for i in range(n) for j in range(n) if p[i] == p[j])
    return out


def enumerate_pseudo_models(universe: Universe, max_states: int, atoms: Sequence[str]) -> Iterator[PseudoModel]:
    """Every pseudo-model with 1..max_states states over ``atoms``, frames taken up to isomorphism."""
    atoms = sorted(atoms)
    valuations = [tuple(a for a, bit in zip(atoms, bits) if bit) for bits in product((0, 1), repeat=len(atoms))]
    for n in range(1, max_states + 1):
        for blocks in enumerate_frames(universe, n):
            rel = frame_relations(blocks)
            for labels in product(valuations, repeat=n):
                yield PseudoModel(universe, list(range(n)), dict(enumerate(labels)), rel, root=0)


def disjoint_union(models: Sequence[PseudoModel]) -> tuple[PseudoModel, list[int]]:
    """Renumber states consecutively; returns the union and each model's offset."""
    if not models:
        raise ValueError("need at least one model")
    u = models[0].universe
    states, labeling, offsets = [], {}, []
    relations: dict[int, set] = {m: set() for m in u.coalitions()}
    for model in models:
        if model.universe != u:
            raise ValueError("models over different agent universes")
        base = len(states)
        offsets.append(base)
        index = {s: base + i for i, s in enumerate(model.states)}
        states.extend(index.values())
        for s, label in model.labeling.items():
            labeling[index[s]] = label
        for m, pairs in model.relations.items():
            relations[m].update((index[s], index[t]) for s, t in pairs)
    return PseudoModel(u, states, labeling, {m: frozenset(p) for m, p in relations.items()}), offsets


class BatchEvaluator:
    """Vectorised evaluation: one boolean array over all states per formula.

    Suited to a large disjoint union of small models.  Only formulas up to
    ``cache_size`` are memoised, to bound memory.
    """

    def __init__(self, model: PseudoModel, cache_size: int = 5):
        self.model = model
        self.cache_size = cache_size
        self.n = len(model.states)
        self.position = {s: i for i, s in enumerate(model.states)}
        self._atoms = {}
        self._d = {}
        self._c = {}
        self.cache: dict[Formula, np.ndarray] = {}

    def _padded(self, lists: list[Sequence[int]]) -> np.ndarray:
        # Index self.n is a sentinel that always reads True.
        width = max((len(x) for x in lists), default=0) or 1
        out = np.full((self.n, width), self.n, dtype=np.int32)
        for i, row in enumerate(lists):
            out[i, : len(row)] = row
        return out

    def _d_table(self, mask: int) -> np.ndarray:
        table = self._d.get(mask)
        if table is None:
            pos = self.position
            table = self._padded([[pos[t] for t in self.model.successors(mask, s)] for s in self.model.states])
            self._d[mask] = table
        return table

    def _c_table(self, mask: int) -> np.ndarray:
        table = self._c.get(mask)
        if table is None:
            pos = self.position
            table = self._padded([sorted(pos[t] for t in a_reachable(self.model, s, mask)) for s in self.model.states])
            self._c[mask] = table
        return table

    def _box(self, table: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.append(v, True)[table].all(axis=1)

    def truth(self, f: Formula) -> np.ndarray:
        hit = self.cache.get(f)
        if hit is not None:
            return hit
        u = self.model.universe
        if isinstance(f, Atom):
            v = self._atoms.get(f.name)
            if v is None:
                v = np.array([f.name in self.model.labeling[s] for s in self.model.states], dtype=bool)
                self._atoms[f.name] = v
        elif isinstance(f, Not):
            v = ~self.truth(f.sub)
        elif isinstance(f, And):
            v = self.truth(f.left) & self.truth(f.right)
        elif isinstance(f, D):
            v = self._box(self._d_table(u.mask(f.agents)), self.truth(f.sub))
        elif isinstance(f, C):
            v = self._box(self._c_table(u.mask(f.agents)), self.truth(f.sub))
        else:
            raise EvaluationError(f"not a formula: {f!r}")
        if f.size <= self.cache_size:
            self.cache[f] = v
        return v


def bisimulation_classes(model: PseudoModel) -> dict[int, int]:
    """Coarsest partition respecting atoms and every ``R^D`` relation.

    Maps each state to a class number; class numbers follow the first
    occurrence of a class in state order.
    """
    u = model.universe
    cls = {s: model.labeling[s] for s in model.states}
    count = -1
    while True:
        sig = {
            s: (cls[s], tuple(frozenset(cls[t] for t in model.successors(m, s)) for m in u.coalitions()))
            for s in model.states
        }
        ids: dict[tuple, int] = {}
        new = {s: ids.setdefault(sig[s], len(ids)) for s in model.states}
        if len(ids) == count:
            return new
        count = len(ids)
        cls = new


def quotient(model: PseudoModel) -> PseudoModel:
    """Bisimulation contraction; equivalence relations and the subset
    ordering between coalitions survive it."""
    cls = bisimulation_classes(model)
    states = sorted(set(cls.values()))
    labeling = {}
    for s in model.states:
        labeling.setdefault(cls[s], model.labeling[s])
    relations = {
        m: frozenset((cls[s], cls[t]) for s, t in pairs) for m, pairs in model.relations.items()
    }
    root = None if model.root is None else cls[model.root]
    return PseudoModel(model.universe, states, labeling, relations, root=root)


__all__ = [
    "EvalContext",
    "EvaluationError",
    "FrameReport",
    "BatchEvaluator",
    "a_reachable",
    "satisfies",
    "truth_set",
    "validate_frame",
    "equivalence_defect",
    "extended_labeling",
    "enumerate_frames",
    "enumerate_pseudo_models",
    "disjoint_union",
    "bisimulation_classes",
    "quotient",
]
