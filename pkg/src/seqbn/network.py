"""Discrete Bayesian networks: variables, DAG structures, CPTs and exact
inference by enumeration.

Values are dense integers ``0..card-1``. A CPT for a child with parents
``p_1 < p_2 < ...`` is a ``(q, r)`` array where row ``j`` is the parent
configuration in mixed-radix order with ``p_1`` varying fastest, and ``r``
is the child cardinality.

Exact inference materializes the full joint table, so it is only meant for
networks with a few thousand joint states (a 10-variable ternary network
has 59,049). Larger networks need a junction tree, which is out of scope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import ParseError, StructureError, ZeroEvidenceError

MISSING = -1

__all__ = [
    "MISSING",
    "VariableTable",
    "NetworkStructure",
    "Cpt",
    "BayesianNetwork",
    "uniform_network",
    "joint_log_prob",
    "forward_sample",
    "marginal_conditional",
    "parse_network",
    "format_network",
    "read_network",
    "write_network",
]


@dataclass(frozen=True)
class VariableTable:
    """Ordered variable names and cardinalities; position is the variable id."""

    names: tuple[str, ...]
    cards: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        object.__setattr__(self, "cards", tuple(int(c) for c in self.cards))
        if len(self.names) != len(self.cards):
            raise StructureError("names and cardinalities differ in length")
        if len(set(self.names)) != len(self.names):
            raise StructureError("variable names must be unique")
        if any(c < 2 for c in self.cards):
            raise StructureError("cardinalities must be >= 2")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, int]]) -> "VariableTable":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None

    @cached_property
    def n_states(self) -> int:
        return math.prod(self.cards)


def _topological_order(parents: Sequence[Sequence[int]]) -> tuple[int, ...] | None:
    n = len(parents)
    indeg = [len(p) for p in parents]
    children = [[] for _ in range(n)]
    for child, ps in enumerate(parents):
        for p in ps:
            children[p].append(child)
    ready = [i for i in range(n) if indeg[i] == 0]
    order = []
    while ready:
        ready.sort()
        v = ready.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return tuple(order) if len(order) == n else None


@dataclass(frozen=True)
class NetworkStructure:
    """A DAG given as one sorted parent tuple per variable."""

    parents: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        parents = tuple(tuple(int(p) for p in ps) for ps in self.parents)
        n = len(parents)
        for child, ps in enumerate(parents):
            if len(set(ps)) != len(ps):
                raise StructureError(f"duplicate parent of variable {child}")
            if child in ps:
                raise StructureError(f"variable {child} is its own parent")
            if any(p < 0 or p >= n for p in ps):
                raise StructureError(f"parent id out of range for variable {child}")
        parents = tuple(tuple(sorted(ps)) for ps in parents)
        object.__setattr__(self, "parents", parents)
        if _topological_order(parents) is None:
            raise StructureError("structure contains a directed cycle")

    @classmethod
    def empty(cls, n: int) -> "NetworkStructure":
        return cls(((),) * n)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "NetworkStructure":
        parents = [[] for _ in range(n)]
        for a, b in edges:
            parents[b].append(a)
        return cls(tuple(tuple(p) for p in parents))

    @property
    def n(self) -> int:
        return len(self.parents)

    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, c) for c, ps in enumerate(self.parents) for p in ps)

    def has_edge(self, a: int, b: int) -> bool:
        return a in self.parents[b]

    @cached_property
    def order(self) -> tuple[int, ...]:
        """Topological order, smallest ready id first."""
        return _topological_order(self.parents)

    def family(self, i: int) -> tuple[int, ...]:
        return tuple(sorted((i,) + self.parents[i]))

    def __str__(self):
        arcs = ", ".join(f"{a}->{b}" for a, b in self.edges())
        return f"NetworkStructure({self.n} vars: {arcs or 'no arcs'})"


@dataclass(frozen=True)
class Cpt:
    child: int
    parents: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    def row(self, parent_values: Sequence[int], cards: Sequence[int]) -> np.ndarray:
        idx, stride = 0, 1
        for p, v in zip(self.parents, parent_values):
            idx += v * stride
            stride *= cards[p]
        return self.table[idx]


def _parent_strides(parents, cards):
    strides = np.ones(len(parents), dtype=np.int64)
    for j in range(1, len(parents)):
        strides[j] = strides[j - 1] * cards[parents[j - 1]]
    return strides


class BayesianNetwork:
    """A structure plus one CPT array per variable.

    ``tables[i]`` has shape ``(q_i, card_i)``. Instances of this class are
    treated as immutable.
    """

    def __init__(self, variables: VariableTable, structure: NetworkStructure,
                 tables: Sequence[np.ndarray], atol: float = 1e-9):
        if structure.n != len(variables):
            raise StructureError("structure and variable table differ in size")
        if len(tables) != len(variables):
            raise StructureError("need one CPT per variable")
        cards = variables.cards
        checked = []
        for i, t in enumerate(tables):
            t = np.array(t, dtype=np.float64)
            q = math.prod(cards[p] for p in structure.parents[i])
            if t.shape != (q, cards[i]):
                raise StructureError(
                    f"CPT for {variables.names[i]} has shape {t.shape}, expected {(q, cards[i])}")
            if np.any(t < 0) or np.any(t > 1 + atol):
                raise StructureError(f"CPT for {variables.names[i]} has entries outside [0, 1]")
            if np.any(np.abs(t.sum(axis=1) - 1.0) > atol):
                raise StructureError(f"CPT rows for {variables.names[i]} do not sum to 1")
            t.setflags(write=False)
            checked.append(t)
        self.variables = variables
        self.structure = structure
        self.tables = tuple(checked)
        self._strides = [_parent_strides(ps, cards) for ps in structure.parents]

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def cards(self) -> tuple[int, ...]:
        return self.variables.cards

    def cpt(self, i: int) -> Cpt:
        return Cpt(i, self.structure.parents[i], self.tables[i])

    def n_parameters(self) -> int:
        """Stored CPT cells (not free parameters)."""
        return sum(t.size for t in self.tables)

    def __eq__(self, other):
        if not isinstance(other, BayesianNetwork):
            return NotImplemented
        return (self.variables == other.variables and self.structure == other.structure
                and all(np.array_equal(a, b) for a, b in zip(self.tables, other.tables)))

    __hash__ = None

    def allclose(self, other: "BayesianNetwork", atol: float = 1e-9) -> bool:
        return (self.variables == other.variables and self.structure == other.structure
                and all(np.allclose(a, b, rtol=0, atol=atol) for a, b in zip(self.tables, other.tables)))

    def _check_instance(self, inst) -> np.ndarray:
        inst = np.asarray(inst, dtype=np.int64)
        if inst.shape != (self.n,):
            raise StructureError(f"instance has shape {inst.shape}, expected ({self.n},)")
        if np.any(inst < 0) or np.any(inst >= np.asarray(self.cards)):
            raise StructureError("instance value out of range (or missing)")
        return inst

    def log_prob(self, inst) -> float:
        """Natural-log probability of a complete instance."""
        inst = self._check_instance(inst)
        total = 0.0
        for i, ps in enumerate(self.structure.parents):
            row = int(inst[list(ps)] @ self._strides[i]) if ps else 0
            p = self.tables[i][row, inst[i]]
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
        return total

    def log_prob_many(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=np.int64)
        out = np.zeros(len(data))
        with np.errstate(divide="ignore"):
            for i, ps in enumerate(self.structure.parents):
                rows = data[:, list(ps)] @ self._strides[i] if ps else np.zeros(len(data), np.int64)
                out += np.log(self.tables[i][rows, data[:, i]])
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` complete instances by ancestral sampling."""
        data = np.zeros((size, self.n), dtype=np.int64)
        for i in self.structure.order:
            ps = list(self.structure.parents[i])
            rows = data[:, ps] @ self._strides[i] if ps else np.zeros(size, np.int64)
            cdf = np.cumsum(self.tables[i], axis=1)[rows]
            u = rng.random(size)
            vals = (u[:, None] >= cdf).sum(axis=1)
            data[:, i] = np.minimum(vals, self.cards[i] - 1)
        return data

    @cached_property
    def joint(self) -> np.ndarray:
        """Full joint table indexed ``[x_0, x_1, ..., x_{n-1}]``."""
        cards = self.cards
        joint = np.ones(cards)
        for i, ps in enumerate(self.structure.parents):
            joint = joint * _broadcast_cpt(self.tables[i], i, ps, cards)
        joint.setflags(write=False)
        return joint

    def marginal(self, variables: Sequence[int]) -> np.ndarray:
        """Joint marginal over ``variables``, axes in the order given."""
        variables = list(variables)
        keep = sorted(set(variables))
        drop = tuple(a for a in range(self.n) if a not in keep)
        m = self.joint.sum(axis=drop) if drop else np.array(self.joint)
        return np.moveaxis(m, [keep.index(v) for v in variables], list(range(len(variables))))


def _broadcast_cpt(table, child, parents, cards):
    """Reshape a ``(q, r)`` CPT into an array broadcastable over the joint."""
    pcards = tuple(cards[p] for p in parents)
    arr = table.T.reshape((cards[child],) + pcards, order="F")
    axes = [child] + list(parents)
    perm = np.argsort(axes)
    arr = arr.transpose(perm)
    shape = [1] * len(cards)
    for a in axes:
        shape[a] = cards[a]
    return arr.reshape(shape)


def uniform_network(variables: VariableTable, structure: NetworkStructure | None = None) -> BayesianNetwork:
    if structure is None:
        structure = NetworkStructure.empty(len(variables))
    cards = variables.cards
    tables = [np.full((math.prod(cards[p] for p in ps), cards[i]), 1.0 / cards[i])
              for i, ps in enumerate(structure.parents)]
    return BayesianNetwork(variables, structure, tables)


def joint_log_prob(net: BayesianNetwork, inst) -> float:
    return net.log_prob(inst)


def forward_sample(net: BayesianNetwork, rng: np.random.Generator) -> np.ndarray:
    return net.sample(rng, 1)[0]


def _as_assignment(n, assignment) -> dict[int, int]:
    if assignment is None:
        return {}
    if isinstance(assignment, Mapping):
        return {int(k): int(v) for k, v in assignment.items() if v is not None and v != MISSING}
    return {i: int(v) for i, v in enumerate(assignment) if v is not None and v != MISSING}


def marginal_conditional(net: BayesianNetwork, target, evidence=None) -> float:
    """Exact ``P(target | evidence)`` by enumeration.

    ``target`` is a mapping ``{var: value}``; ``evidence`` is either a mapping
    or a partial instance with ``MISSING``/``None`` for unobserved variables.
    Raises ``ZeroEvidenceError`` when the evidence has probability zero.
    """
    target = _as_assignment(net.n, target)
    evidence = _as_assignment(net.n, evidence)
    for v, val in evidence.items():
        if v in target and target[v] != val:
            return 0.0
    ev_index = tuple(evidence.get(i, slice(None)) for i in range(net.n))
    p_evidence = float(net.joint[ev_index].sum())
    if p_evidence <= 0.0:
        raise ZeroEvidenceError("evidence has probability zero")
    both = {**evidence, **target}
    both_index = tuple(both.get(i, slice(None)) for i in range(net.n))
    return float(net.joint[both_index].sum()) / p_evidence


# --- text format -----------------------------------------------------------

def parse_network(text: str) -> BayesianNetwork:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line.split()))
    if not lines:
        raise ParseError("empty network file")
    pos = 0

    def take(keyword):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of file, expected {keyword!r}")
        lineno, toks = lines[pos]
        if toks[0] != keyword:
            raise ParseError(f"expected {keyword!r}, found {toks[0]!r}", lineno)
        pos += 1
        return lineno, toks[1:]

    lineno, toks = take("vars")
    if len(toks) != 1 or not toks[0].isdigit():
        raise ParseError("'vars' takes one integer", lineno)
    n = int(toks[0])
    pairs = []
    for _ in range(n):
        lineno, toks = take("var")
        if len(toks) != 2:
            raise ParseError("'var' takes a name and a cardinality", lineno)
        try:
            card = int(toks[1])
        except ValueError:
            raise ParseError(f"bad cardinality {toks[1]!r}", lineno) from None
        pairs.append((toks[0], card))
    try:
        variables = VariableTable.from_pairs(pairs)
    except StructureError as exc:
        raise ParseError(str(exc), lineno) from None

    def lookup(name, lineno):
        try:
            return variables.index(name)
        except KeyError:
            raise ParseError(f"unknown variable {name!r}", lineno) from None

    parents: list[tuple[int, ...] | None] = [None] * n
    for _ in range(n):
        lineno, toks = take("parents")
        if not toks:
            raise ParseError("'parents' needs a child name", lineno)
        child = lookup(toks[0], lineno)
        if parents[child] is not None:
            raise ParseError(f"parents of {toks[0]!r} given twice", lineno)
        ps = [lookup(t, lineno) for t in toks[1:]]
        if len(set(ps)) != len(ps):
            raise ParseError(f"repeated parent of {toks[0]!r}", lineno)
        # CPT rows follow parent ids, whatever order the names are listed in
        parents[child] = tuple(sorted(ps))
    try:
        structure = NetworkStructure(tuple(parents))
    except StructureError as exc:
        raise ParseError(str(exc), lineno) from None

    tables: list[np.ndarray | None] = [None] * n
    while pos < len(lines):
        lineno, toks = take("cpt")
        if len(toks) != 1:
            raise ParseError("'cpt' takes one variable name", lineno)
        child = lookup(toks[0], lineno)
        if tables[child] is not None:
            raise ParseError(f"CPT for {toks[0]!r} given twice", lineno)
        q = math.prod(variables.cards[p] for p in structure.parents[child])
        rows = []
        for _ in range(q):
            if pos >= len(lines):
                raise ParseError(f"CPT for {toks[0]!r} is missing rows")
            lineno, row = lines[pos]
            pos += 1
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise ParseError(f"bad probability row {' '.join(row)!r}", lineno) from None
            if len(values) != variables.cards[child]:
                raise ParseError(f"row has {len(values)} entries, expected {variables.cards[child]}", lineno)
            rows.append(values)
        tables[child] = np.array(rows)
    missing = [variables.names[i] for i, t in enumerate(tables) if t is None]
    if missing:
        raise ParseError(f"missing CPT for {', '.join(missing)}")
    try:
        return BayesianNetwork(variables, structure, tables, atol=1e-6)
    except StructureError as exc:
        raise ParseError(str(exc)) from None


def format_network(net: BayesianNetwork) -> str:
    names = net.variables.names
    out = ["# format=1", f"vars {net.n}"]
    out += [f"var {name} {card}" for name, card in zip(names, net.cards)]
    for i, ps in enumerate(net.structure.parents):
        out.append(" ".join(["parents", names[i]] + [names[p] for p in ps]))
    for i, table in enumerate(net.tables):
        out.append(f"cpt {names[i]}")
        out += [" ".join(repr(float(x)) for x in row) for row in table]
    return "\n".join(out) + "\n"


def read_network(path) -> BayesianNetwork:
    return parse_network(Path(path).read_text(encoding="utf-8"))


def write_network(net: BayesianNetwork, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_network(net), encoding="utf-8")
