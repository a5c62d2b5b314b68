"""Exhaustive and random formula generation for differential testing."""

from __future__ import annotations

import random
from typing import Iterator, Sequence

from .formula import And, Atom, C, D, Formula, Not, Universe, sort_key


def enumerate_formulas(universe: Universe, atoms: Sequence[str], max_size: int) -> Iterator[Formula]:
    """Every core formula with AST size up to ``max_size``, smallest first."""
    coalitions = [universe.members(m) for m in universe.coalitions()]
    by_size: list[list[Formula]] = [[] for _ in range(max_size + 1)]
    if max_size >= 1:
        by_size[1] = [Atom(a) for a in atoms]
    for n in range(2, max_size + 1):
        level = by_size[n]
        for f in by_size[n - 1]:
            level.append(Not(f))
            for agents in coalitions:
                level.append(D(agents, f))
                level.append(C(agents, f))
        for k in range(1, n - 1):
            for left in by_size[k]:
                for right in by_size[n - 1 - k]:
                    level.append(And(left, right))
    for level in by_size:
        yield from level


# Relative weights of the constructors in random formulas.
DEFAULT_WEIGHTS = {"atom": 3, "not": 3, "and": 3, "D": 2, "C": 2}


def random_formula(
    rng: random.Random,
    universe: Universe,
    atoms: Sequence[str],
    max_size: int,
    weights: dict[str, int] = DEFAULT_WEIGHTS,
) -> Formula:
    """A random formula of size at most ``max_size``."""
    coalitions = [universe.members(m) for m in universe.coalitions()]
    kinds = list(weights)
    w = [weights[k] for k in kinds]

    def build(budget: int) -> Formula:
        choices = [(k, x) for k, x in zip(kinds, w) if k == "atom" or budget >= (3 if k == "and" else 2)]
        kind = rng.choices([k for k, _ in choices], [x for _, x in choices])[0]
        if kind == "atom":
            return Atom(rng.choice(list(atoms)))
        if kind == "and":
            left = build(rng.randint(1, budget - 2))
            return And(left, build(budget - 1 - left.size))
        sub = build(budget - 1)
        if kind == "not":
            return Not(sub)
        agents = rng.choice(coalitions)
        return D(agents, sub) if kind == "D" else C(agents, sub)

    return build(rng.randint(1, max_size))


def rename(f: Formula, agents: dict[str, str] | None = None, atoms: dict[str, str] | None = None) -> Formula:
    """Apply a renaming of agents and/or atoms."""
    agents = agents or {}
    atoms = atoms or {}
    if isinstance(f, Atom):
        return Atom(atoms.get(f.name, f.name))
    if isinstance(f, Not):
        return Not(rename(f.sub, agents, atoms))
    if isinstance(f, And):
        return And(rename(f.left, agents, atoms), rename(f.right, agents, atoms))
    cls = D if isinstance(f, D) else C
    return cls([agents.get(a, a) for a in f.agents], rename(f.sub, agents, atoms))


def symmetry_representatives(formulas, renamings) -> list[Formula]:
    """Keep each formula that is least, in canonical order, among its images."""
    keep = []
    for f in formulas:
        images = [rename(f, ag, at) for ag, at in renamings]
        if all(sort_key(f) <= sort_key(g) for g in images):
            keep.append(f)
    return keep
