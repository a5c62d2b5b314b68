"""Finite relational structures over a fixed agent universe, with JSON I/O.

A :class:`PseudoModel` stores one binary relation ``R^D_A`` per nonempty
coalition.  Common-knowledge relations are derived on demand and never
serialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .formula import Universe

Pair = tuple[int, int]


@dataclass
class PseudoModel:
    universe: Universe
    states: list[int]
    labeling: dict[int, tuple[str, ...]]
    relations: dict[int, frozenset[Pair]]          # coalition mask -> R^D
    root: int | None = None
    _succ: dict[int, dict[int, tuple[int, ...]]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.states = list(self.states)
        known = set(self.states)
        self.labeling = {s: tuple(sorted(set(self.labeling.get(s, ())))) for s in self.states}
        rel = {}
        for m in self.universe.coalitions():
            pairs = frozenset(self.relations.get(m, ()))
            for s, t in pairs:
                if s not in known or t not in known:
                    raise ValueError(f"relation {self.universe.key(m)} mentions unknown state in {(s, t)}")
            rel[m] = pairs
        extra = set(self.relations) - set(rel)
        if extra:
            raise ValueError(f"relations for invalid coalition masks {sorted(extra)}")
        self.relations = rel
        if self.root is not None and self.root not in known:
            raise ValueError(f"root {self.root} is not a state")

    def successors(self, coalition: int, s: int) -> tuple[int, ...]:
        table = self._succ.get(coalition)
        if table is None:
            build: dict[int, list[int]] = {t: [] for t in self.states}
            for a, b in sorted(self.relations[coalition]):
                build[a].append(b)
            table = {t: tuple(v) for t, v in build.items()}
            self._succ[coalition] = table
        return table[s]

    def holds_atom(self, s: int, name: str) -> bool:
        return name in self.labeling[s]

    # -- JSON ------------------------------------------------------------

    def to_json(self) -> dict:
        u = self.universe
        return {
            "agents": list(u.names),
            "states": list(self.states),
            "labeling": {str(s): list(self.labeling[s]) for s in self.states},
            "relations": {
                "D": {u.key(m): [list(p) for p in sorted(self.relations[m])] for m in u.coalitions()}
            },
            "root": self.root,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, data: Mapping) -> "PseudoModel":
        try:
            universe = Universe(data["agents"])
            states = [int(s) for s in data["states"]]
            labeling = {int(k): tuple(v) for k, v in data.get("labeling", {}).items()}
            relations: dict[int, list[Pair]] = {}
            for key, pairs in data.get("relations", {}).get("D", {}).items():
                mask = universe.mask(part for part in key.split(",") if part)
                if not mask:
                    raise ValueError("empty coalition key")
                relations[mask] = [(int(s), int(t)) for s, t in pairs]
            root = data.get("root")
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed model JSON: {exc!r}") from None
        return cls(universe, states, labeling, {m: frozenset(p) for m, p in relations.items()},
                   None if root is None else int(root))

    @classmethod
    def loads(cls, text: str) -> "PseudoModel":
        return cls.from_json(json.loads(text))

    @classmethod
    def load(cls, path: str) -> "PseudoModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def identity(states: Iterable[int]) -> frozenset[Pair]:
    return frozenset((s, s) for s in states)


def equivalence_closure(states: Iterable[int], pairs: Iterable[Pair]) -> frozenset[Pair]:
    """Smallest equivalence relation over ``states`` containing ``pairs``."""
    states = list(states)
    parent = {s: s for s in states}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, t in pairs:
        rs, rt = find(s), find(t)
        if rs != rt:
            parent[max(rs, rt)] = min(rs, rt)
    blocks: dict[int, list[int]] = {}
    for s in states:
        blocks.setdefault(find(s), []).append(s)
    return frozenset((s, t) for block in blocks.values() for s in block for t in block)


def transitive_closure(pairs: Iterable[Pair]) -> frozenset[Pair]:
    succ: dict[int, set[int]] = {}
    for s, t in pairs:
        succ.setdefault(s, set()).add(t)
    out = set()
    for s in succ:
        seen = set()
        stack = list(succ[s])
        while stack:
            t = stack.pop()
            if t in seen:
                continue
            seen.add(t)
            stack.extend(succ.get(t, ()))
        out.update((s, t) for t in seen)
    return frozenset(out)


def reflexive_transitive_closure(states: Iterable[int], pairs: Iterable[Pair]) -> frozenset[Pair]:
    return transitive_closure(pairs) | identity(states)
