"""Formulas of CMAEL(CD): agents, coalitions, the core AST, concrete syntax and closures.

The core language has five constructors -- atoms, negation, conjunction,
distributed knowledge ``D{A}`` and common knowledge ``C{A}`` -- and every node
is hash-consed, so structurally equal formulas are the same Python object.
Disjunction, implication, equivalence and individual knowledge ``K a`` exist
only in the concrete syntax and are desugared by the parser.
"""

from __future__ import annotations

import re
import warnings
from typing import Iterable, Iterator, Sequence

__all__ = [
    "Universe",
    "Formula",
    "Atom",
    "Not",
    "And",
    "D",
    "C",
    "FormulaSet",
    "ParseError",
    "neg",
    "parse",
    "closure",
    "extended_closure",
    "is_eventuality",
    "conjuncts",
    "conjoin",
    "subformulas",
    "atoms_of",
]

MAX_AGENTS = 16

_NAME = re.compile(r"[a-z][a-z0-9_]*\Z")


class Universe:
    """The declared agent set; agent ids are positions in ``names``.

    Coalitions are handled as bitmasks over agent ids.
    """

    __slots__ = ("names", "_ids", "full")

    def __init__(self, names: Sequence[str]):
        names = tuple(names)
        if not names:
            raise ValueError("agent universe must be nonempty")
        if len(names) > MAX_AGENTS:
            raise ValueError(f"at most {MAX_AGENTS} agents are supported, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate agent names in {list(names)}")
        for name in names:
            if not _NAME.match(name):
                raise ValueError(f"invalid agent name {name!r}")
        if len(names) == 1:
            warnings.warn(
                "single-agent universe: D and C coincide; deciding anyway",
                stacklevel=2,
            )
        self.names = names
        self._ids = {name: i for i, name in enumerate(names)}
        self.full = (1 << len(names)) - 1

    @classmethod
    def parse(cls, csv: str) -> "Universe":
        return cls([part.strip() for part in csv.split(",") if part.strip()])

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Universe) and other.names == self.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"Universe({list(self.names)!r})"

    def agent_id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise ValueError(f"unknown agent {name!r}; declared agents are {list(self.names)}") from None

    def mask(self, agents: Iterable[str]) -> int:
        m = 0
        for name in agents:
            m |= 1 << self.agent_id(name)
        return m

    def members(self, mask: int) -> tuple[str, ...]:
        """Agent names of ``mask`` in agent-id order."""
        return tuple(name for i, name in enumerate(self.names) if mask >> i & 1)

    def singletons(self, mask: int) -> list[int]:
        return [1 << i for i in range(len(self.names)) if mask >> i & 1]

    def coalitions(self) -> list[int]:
        """All nonempty coalitions, ordered by size and then by mask."""
        return sorted(range(1, self.full + 1), key=lambda m: (bin(m).count("1"), m))

    def supersets(self, mask: int) -> list[int]:
        return [m for m in self.coalitions() if m & mask == mask]

    def subsets(self, mask: int) -> list[int]:
        return [m for m in self.coalitions() if m & mask == m]

    def key(self, mask: int) -> str:
        """Comma-joined sorted agent names, used as a JSON key."""
        return ",".join(sorted(self.members(mask)))


# ---------------------------------------------------------------------------
# AST


_TABLE: dict[tuple, "Formula"] = {}


class Formula:
    """Base class of hash-consed formula nodes.

    Do not instantiate subclasses directly with ``object.__new__``; the
    constructors intern every node so that ``==`` is identity.
    """

    __slots__ = ("size", "_str", "__weakref__")

    def __str__(self) -> str:
        if self._str is None:
            self._str = _show(self)
        return self._str

    def __repr__(self) -> str:
        return f"<{self}>"

    def __lt__(self, other: "Formula") -> bool:
        return sort_key(self) < sort_key(other)

    @property
    def children(self) -> tuple["Formula", ...]:
        return ()


def _intern(key: tuple, cls, size: int, **fields) -> Formula:
    node = _TABLE.get(key)
    if node is None:
        node = object.__new__(cls)
        node.size = size
        node._str = None
        for name, value in fields.items():
            object.__setattr__(node, name, value)
        _TABLE[key] = node
    return node


class Atom(Formula):
    __slots__ = ("name",)

    def __new__(cls, name: str):
        return _intern(("atom", name), cls, 1, name=name)

    def __reduce__(self):
        return (Atom, (self.name,))


class Not(Formula):
    __slots__ = ("sub",)

    def __new__(cls, sub: Formula):
        return _intern(("not", sub), cls, sub.size + 1, sub=sub)

    @property
    def children(self):
        return (self.sub,)

    def __reduce__(self):
        return (Not, (self.sub,))


class And(Formula):
    __slots__ = ("left", "right")

    def __new__(cls, left: Formula, right: Formula):
        return _intern(("and", left, right), cls, left.size + right.size + 1, left=left, right=right)

    @property
    def children(self):
        return (self.left, self.right)

    def __reduce__(self):
        return (And, (self.left, self.right))


class _Modal(Formula):
    __slots__ = ("agents", "sub")

    tag = ""

    def __new__(cls, agents: Iterable[str], sub: Formula):
        agents = tuple(sorted(set(agents)))
        if not agents:
            raise ValueError(f"{cls.tag} requires a nonempty coalition")
        return _intern((cls.tag, agents, sub), cls, sub.size + 1, agents=agents, sub=sub)

    @property
    def children(self):
        return (self.sub,)

    def __reduce__(self):
        return (type(self), (self.agents, self.sub))


class D(_Modal):
    """Distributed knowledge of a coalition."""

    __slots__ = ()
    tag = "D"


class C(_Modal):
    """Common knowledge of a coalition."""

    __slots__ = ()
    tag = "C"


def sort_key(f: Formula) -> tuple[int, str]:
    return (f.size, str(f))


def neg(f: Formula) -> Formula:
    """Single negation: strips one leading negation, otherwise wraps."""
    return f.sub if isinstance(f, Not) else Not(f)


def is_eventuality(f: Formula) -> bool:
    return isinstance(f, Not) and isinstance(f.sub, C)


def conjuncts(f: Formula) -> list[Formula]:
    """Top-level conjuncts of ``f``, left to right, without duplicates."""
    out: dict[Formula, None] = {}
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, And):
            stack.append(g.right)
            stack.append(g.left)
        else:
            out[g] = None
    return list(out)


def conjoin(fs: Sequence[Formula]) -> Formula:
    if not fs:
        raise ValueError("cannot conjoin an empty sequence")
    result = fs[0]
    for f in fs[1:]:
        result = And(result, f)
    return result


def subformulas(f: Formula) -> Iterator[Formula]:
    seen: dict[Formula, None] = {}
    stack = [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen[g] = None
        yield g
        stack.extend(reversed(g.children))


def atoms_of(f: Formula) -> list[str]:
    return sorted({g.name for g in subformulas(f) if isinstance(g, Atom)})


# ---------------------------------------------------------------------------
# Printing


def _show(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "~" + _operand(f.sub)
    if isinstance(f, _Modal):
        return f"{f.tag}{{{','.join(f.agents)}}}" + _operand(f.sub)
    if isinstance(f, And):
        right = str(f.right)
        if isinstance(f.right, And):
            right = f"({right})"
        return f"{f.left} & {right}"
    raise TypeError(f"not a formula: {f!r}")


def _operand(f: Formula) -> str:
    return f"({f})" if isinstance(f, And) else str(f)


# ---------------------------------------------------------------------------
# Parsing


class ParseError(ValueError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.message = message
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")

    def pretty(self) -> str:
        if not self.text:
            return str(self)
        return f"{self}\n  {self.text}\n  {' ' * self.pos}^"


_TOKEN = re.compile(
    r"\s*(?:(?P<arrow><->|->)|(?P<punct>[~&|(){},])|(?P<op>[DCK])(?![A-Za-z0-9_])|(?P<name>[a-z][a-z0-9_]*))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        value = m.group(kind)
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, universe: Universe):
        self.text = text
        self.universe = universe
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok[2], self.text)

    def expect(self, value: str) -> None:
        tok = self.advance()
        if tok[1] != value:
            shown = tok[1] or "end of input"
            raise self.error(f"expected {value!r}, found {shown!r}", tok)

    def parse(self) -> Formula:
        f = self.iff()
        if self.peek()[0] != "eof":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return f

    def iff(self) -> Formula:
        left = self.implies()
        while self.peek()[1] == "<->":
            self.advance()
            right = self.implies()
            left = And(_implies(left, right), _implies(right, left))
        return left

    def implies(self) -> Formula:
        left = self.disjunction()
        if self.peek()[1] == "->":
            self.advance()
            return _implies(left, self.implies())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.peek()[1] == "|":
            self.advance()
            right = self.conjunction()
            left = Not(And(Not(left), Not(right)))
        return left

    def conjunction(self) -> Formula:
        left = self.prefix()
        while self.peek()[1] == "&":
            self.advance()
            left = And(left, self.prefix())
        return left

    def prefix(self) -> Formula:
        kind, value, pos = self.peek()
        if value == "~":
            self.advance()
            return Not(self.prefix())
        if kind == "op" and value in "DC":
            self.advance()
            agents = self.coalition()
            sub = self.prefix()
            return D(agents, sub) if value == "D" else C(agents, sub)
        if kind == "op" and value == "K":
            self.advance()
            tok = self.advance()
            if tok[0] != "name":
                raise self.error("expected an agent name after K", tok)
            self.check_agent(tok)
            return D([tok[1]], self.prefix())
        if value == "(":
            self.advance()
            f = self.iff()
            self.expect(")")
            return f
        if kind == "name":
            self.advance()
            return Atom(value)
        shown = value or "end of input"
        raise self.error(f"expected a formula, found {shown!r}")

    def coalition(self) -> list[str]:
        open_tok = self.peek()
        self.expect("{")
        if self.peek()[1] == "}":
            raise self.error("empty coalition", open_tok)
        agents = []
        while True:
            tok = self.advance()
            if tok[0] != "name":
                raise self.error("expected an agent name", tok)
            self.check_agent(tok)
            agents.append(tok[1])
            if self.peek()[1] == ",":
                self.advance()
                continue
            self.expect("}")
            return agents

    def check_agent(self, tok) -> None:
        if tok[1] not in self.universe:
            raise self.error(f"unknown agent {tok[1]!r}", tok)


def _implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def parse(text: str, universe: Universe) -> Formula:
    """Parse concrete syntax into the core AST over ``universe``.

    >>> u = Universe(["a", "b"])
    >>> str(parse("K a p -> C{a,b}(p & q)", u))
    '~(D{a}p & ~C{a,b}(p & q))'
    """
    return _Parser(text, universe).parse()


# ---------------------------------------------------------------------------
# Formula sets and closures


class FormulaSet:
    """Immutable, duplicate-free set of formulas in canonical order."""

    __slots__ = ("_items", "_set", "_hash")

    def __init__(self, formulas: Iterable[Formula] = ()):
        unique = set(formulas)
        self._items = tuple(sorted(unique, key=sort_key))
        self._set = frozenset(unique)
        self._hash = None

    @classmethod
    def presorted(cls, formulas: Sequence[Formula]) -> "FormulaSet":
        """Wrap formulas that are already distinct and in canonical order."""
        out = object.__new__(cls)
        out._items = tuple(formulas)
        out._set = frozenset(out._items)
        out._hash = None
        return out

    def __iter__(self) -> Iterator[Formula]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, f: object) -> bool:
        return f in self._set

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FormulaSet):
            return self._set == other._set
        if isinstance(other, (set, frozenset)):
            return self._set == other
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._set)
        return self._hash

    def __le__(self, other: "FormulaSet") -> bool:
        return self._set <= set(other)

    def __lt__(self, other: "FormulaSet") -> bool:
        return self._set < set(other)

    def __or__(self, other: Iterable[Formula]) -> "FormulaSet":
        return FormulaSet(self._set | set(other))

    def issubset(self, other: Iterable[Formula]) -> bool:
        return self._set.issubset(other)

    def __repr__(self) -> str:
        return "{" + ", ".join(map(str, self._items)) + "}"


def closure(theta: Formula | Iterable[Formula], universe: Universe) -> FormulaSet:
    """Least set containing ``theta`` closed under subformulas, the superset
    rule for ``D`` and the unfolding ``C{A}f => D{a}(f & C{A}f)`` for ``a`` in ``A``.

    ``theta`` may also be a collection of formulas (a conjunct set).
    """
    roots = [theta] if isinstance(theta, Formula) else list(theta)
    seen: dict[Formula, None] = {}
    todo = list(roots)
    while todo:
        f = todo.pop()
        if f in seen:
            continue
        seen[f] = None
        todo.extend(f.children)
        if isinstance(f, D):
            for m in universe.supersets(universe.mask(f.agents)):
                todo.append(D(universe.members(m), f.sub))
        elif isinstance(f, C):
            unfolded = And(f.sub, f)
            for a in f.agents:
                universe.agent_id(a)
                todo.append(D([a], unfolded))
    return FormulaSet(seen)


def extended_closure(theta: Formula | Iterable[Formula], universe: Universe) -> FormulaSet:
    cl = closure(theta, universe)
    return FormulaSet([*cl, *(neg(f) for f in cl)])
