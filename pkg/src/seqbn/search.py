"""Greedy hill climbing over DAGs with arc addition, deletion and reversal,
restricted to structures the available statistics can score."""
from __future__ import annotations

import math
from typing import Callable, Iterable, NamedTuple

from .exceptions import EvaluationError
from .network import NetworkStructure
from .scoring import ScoreConfig, local_score
from .statstore import FamilyKey, suff

__all__ = [
    "Move",
    "legal_moves",
    "apply_move",
    "neighbors",
    "hill_climb",
    "score_tolerance",
    "compare_scores",
    "Frontier",
    "compute_frontier",
    "frontier_keys",
    "skeleton",
    "v_structures",
    "equivalent",
    "structural_hamming_distance",
]

_KIND_RANK = {"add": 0, "delete": 1, "reverse": 2}


class Move(NamedTuple):
    kind: str
    src: int
    dst: int

    def sort_key(self):
        return (_KIND_RANK[self.kind], self.src, self.dst)


def _children(parents):
    children = [[] for _ in parents]
    for c, ps in enumerate(parents):
        for p in ps:
            children[p].append(c)
    return children


def _reaches(children, start, target, skip_edge=None) -> bool:
    stack, seen = [start], {start}
    while stack:
        v = stack.pop()
        for c in children[v]:
            if (v, c) == skip_edge:
                continue
            if c == target:
                return True
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def legal_moves(g: NetworkStructure) -> list[Move]:
    """All single-arc changes that keep ``g`` acyclic, in canonical order."""
    parents = g.parents
    children = _children(parents)
    moves = []
    for a in range(g.n):
        for b in range(g.n):
            if a == b:
                continue
            if a in parents[b]:
                moves.append(Move("delete", a, b))
                if not _reaches(children, a, b, skip_edge=(a, b)):
                    moves.append(Move("reverse", a, b))
            elif b not in parents[a] and not _reaches(children, b, a):
                moves.append(Move("add", a, b))
    moves.sort(key=Move.sort_key)
    return moves


def _changed_families(g: NetworkStructure, move: Move) -> list[tuple[int, tuple[int, ...]]]:
    a, b = move.src, move.dst
    pa_b = set(g.parents[b])
    if move.kind == "add":
        return [(b, tuple(sorted(pa_b | {a})))]
    if move.kind == "delete":
        return [(b, tuple(sorted(pa_b - {a})))]
    return [(b, tuple(sorted(pa_b - {a}))), (a, tuple(sorted(set(g.parents[a]) | {b})))]


def apply_move(g: NetworkStructure, move: Move) -> NetworkStructure:
    parents = list(g.parents)
    for child, ps in _changed_families(g, move):
        parents[child] = ps
    return NetworkStructure(tuple(parents))


def neighbors(g: NetworkStructure) -> list[tuple[Move, NetworkStructure]]:
    return [(m, apply_move(g, m)) for m in legal_moves(g)]


def score_tolerance(total: float) -> float:
    """Gains at or below this are treated as ties by the search."""
    return 1e-10 * (1.0 + abs(total))


def compare_scores(a: float, b: float) -> int:
    """1 if ``a`` beats ``b`` by more than the tie tolerance, -1 if ``b`` does, else 0."""
    tol = score_tolerance(max(abs(a), abs(b)))
    return 1 if a - b > tol else (-1 if b - a > tol else 0)


def hill_climb(start: NetworkStructure, source, cfg: ScoreConfig, max_parents: int = 5,
               max_steps: int | None = None, trace: list | None = None) -> NetworkStructure:
    """Move to the best strictly improving evaluable neighbor until none exists.

    A neighbor is evaluable when every changed family can be supplied by
    ``source`` and no family exceeds ``max_parents``. Ties go to the first
    move in canonical order. If ``trace`` is a list, ``(move, total)`` pairs
    are appended, starting with ``(None, start_total)``.
    """
    cache: dict[tuple[int, tuple[int, ...]], float | None] = {}

    def local(child, parents):
        k = (child, parents)
        if k not in cache:
            key = tuple(sorted((child,) + parents))
            if len(parents) > max_parents or not source.can_supply(key):
                cache[k] = None
            else:
                cache[k] = local_score(source.record_for(key), child, cfg)
        return cache[k]

    current = start
    scores = []
    for i, ps in enumerate(current.parents):
        s = local(i, ps)
        if s is None:
            raise EvaluationError(f"starting structure family {current.family(i)} cannot be evaluated")
        scores.append(s)
    total = math.fsum(scores)
    if trace is not None:
        trace.append((None, total))
    steps = 0
    while max_steps is None or steps < max_steps:
        tol = score_tolerance(total)
        best = None
        for move in legal_moves(current):
            changes = _changed_families(current, move)
            new = [local(c, ps) for c, ps in changes]
            if any(s is None for s in new):
                continue
            delta = sum(new) - sum(scores[c] for c, _ in changes)
            if delta > tol and (best is None or delta > best[0] + tol):
                best = (delta, move, changes, new)
        if best is None:
            break
        _, move, changes, new = best
        current = apply_move(current, move)
        for (c, _), s in zip(changes, new):
            scores[c] = s
        total = math.fsum(scores)
        steps += 1
        if trace is not None:
            trace.append((move, total))
    return current


class Frontier(frozenset):
    """Set of candidate structures; always contains ``current``."""

    def __new__(cls, current: NetworkStructure, others: Iterable[NetworkStructure] = ()):
        self = super().__new__(cls, [current, *others])
        self.current = current
        return self

    def keys(self) -> set[FamilyKey]:
        return frontier_keys(self)


def compute_frontier(g: NetworkStructure, width: int = 1, max_parents: int | None = None,
                     rank: Callable[[NetworkStructure], float] | None = None) -> Frontier:
    """``g`` plus its neighbors; with ``width > 1`` the best ``width - 1``
    neighbors under ``rank`` also contribute their neighbors (beam)."""

    def nbrs(s):
        out = [h for _, h in neighbors(s)]
        if max_parents is not None:
            out = [h for h in out if max(map(len, h.parents), default=0) <= max_parents]
        return out

    first = nbrs(g)
    members = set(first)
    if width > 1:
        if rank is None:
            raise ValueError("beam frontier needs a rank function")
        ranked = sorted(first, key=rank, reverse=True)[:width - 1]
        for cand in ranked:
            members.update(nbrs(cand))
    members.discard(g)
    return Frontier(g, members)


def frontier_keys(frontier: Iterable[NetworkStructure]) -> set[FamilyKey]:
    keys: set[FamilyKey] = set()
    for s in frontier:
        keys |= suff(s)
    return keys


def skeleton(g: NetworkStructure) -> set[frozenset]:
    return {frozenset(e) for e in g.edges()}


def v_structures(g: NetworkStructure) -> set[tuple[int, int, int]]:
    """Triples ``(a, c, b)`` with ``a -> c <- b``, ``a < b`` and ``a, b`` non-adjacent."""
    out = set()
    for c, ps in enumerate(g.parents):
        for i, a in enumerate(ps):
            for b in ps[i + 1:]:
                if not (g.has_edge(a, b) or g.has_edge(b, a)):
                    out.add((a, c, b))
    return out


def equivalent(g1: NetworkStructure, g2: NetworkStructure) -> bool:
    """Markov equivalence: same skeleton and same v-structures."""
    return skeleton(g1) == skeleton(g2) and v_structures(g1) == v_structures(g2)


def structural_hamming_distance(g1: NetworkStructure, g2: NetworkStructure) -> int:
    """Missing, extra and reversed arcs, each counting once."""
    e1, e2 = set(g1.edges()), set(g2.edges())
    dist = 0
    for a, b in e1 | e2:
        if a > b and ((b, a) in e1 | e2):
            continue
        in1 = (a, b) in e1, (b, a) in e1
        in2 = (a, b) in e2, (b, a) in e2
        if in1 != in2:
            dist += 1
    return dist
