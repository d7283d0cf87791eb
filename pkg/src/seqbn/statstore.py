"""Sufficient-statistics records and the store that keeps them in step with
a search frontier.

A record holds the count vector over the joint values of a sorted set of
variables (a family key), laid out in mixed-radix order with the lowest
variable id varying fastest. Counts are floats so the same record type
serves hard counts and EM's expected counts.
"""
from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import EvaluationError, StructureError

FamilyKey = tuple[int, ...]

DEFAULT_MAX_CELLS = 10**6

__all__ = [
    "FamilyKey",
    "family_key",
    "StatisticsRecord",
    "StatisticsStore",
    "suff",
    "can_evaluate",
    "marginalize",
    "absorb",
    "retarget",
    "memory_units",
    "count_family",
]


def family_key(variables: Iterable[int]) -> FamilyKey:
    key = tuple(sorted(set(int(v) for v in variables)))
    if not key:
        raise StructureError("family key must be non-empty")
    return key


def _strides(key: Sequence[int], cards: Sequence[int]) -> np.ndarray:
    out = np.ones(len(key), dtype=np.int64)
    for j in range(1, len(key)):
        out[j] = out[j - 1] * cards[key[j - 1]]
    return out


def count_family(data: np.ndarray, key: FamilyKey, cards: Sequence[int]) -> np.ndarray:
    """Batch count vector of ``key`` over the rows of a complete dataset."""
    size = math.prod(cards[v] for v in key)
    if len(data) == 0:
        return np.zeros(size)
    idx = np.asarray(data)[:, list(key)] @ _strides(key, cards)
    return np.bincount(idx, minlength=size).astype(np.float64)


class StatisticsRecord:
    """Count vector for one family key.

    ``absorbed`` is the total weight summarized and ``birth_index`` the
    store's instance counter when the record started collecting.
    """

    __slots__ = ("key", "shape", "counts", "absorbed", "birth_index")

    def __init__(self, key: FamilyKey, shape: Sequence[int], counts=None,
                 absorbed: float = 0.0, birth_index: int = 0):
        self.key = tuple(key)
        self.shape = tuple(shape)
        size = math.prod(self.shape)
        if counts is None:
            counts = np.zeros(size)
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != (size,):
            raise StructureError(f"count vector of length {counts.size}, expected {size}")
        self.counts = counts
        self.absorbed = float(absorbed)
        self.birth_index = int(birth_index)

    @classmethod
    def for_key(cls, key: FamilyKey, cards: Sequence[int], **kwargs) -> "StatisticsRecord":
        return cls(key, [cards[v] for v in key], **kwargs)

    @property
    def size(self) -> int:
        return self.counts.size

    def table(self) -> np.ndarray:
        """Counts as an array indexed by the key's variables in key order."""
        return self.counts.reshape(self.shape, order="F")

    def index_of(self, inst) -> int:
        idx, stride = 0, 1
        for v, c in zip(self.key, self.shape):
            idx += int(inst[v]) * stride
            stride *= c
        return idx

    def marginalize(self, sub: Iterable[int]) -> "StatisticsRecord":
        sub = family_key(sub)
        if not set(sub) <= set(self.key):
            raise StructureError(f"{sub} is not a subset of record key {self.key}")
        if sub == self.key:
            return self.copy()
        drop = tuple(j for j, v in enumerate(self.key) if v not in sub)
        counts = self.table().sum(axis=drop).ravel(order="F")
        shape = [c for v, c in zip(self.key, self.shape) if v in sub]
        return StatisticsRecord(sub, shape, counts, self.absorbed, self.birth_index)

    def copy(self) -> "StatisticsRecord":
        return StatisticsRecord(self.key, self.shape, self.counts.copy(),
                                self.absorbed, self.birth_index)

    def __repr__(self):
        return (f"StatisticsRecord(key={self.key}, absorbed={self.absorbed:g}, "
                f"birth_index={self.birth_index})")


def marginalize(rec: StatisticsRecord, sub: Iterable[int]) -> StatisticsRecord:
    return rec.marginalize(sub)


def suff(structure) -> set[FamilyKey]:
    """Family keys needed to score ``structure``."""
    return {structure.family(i) for i in range(structure.n)}


class StatisticsStore:
    """The active set of records plus the global instance counter ``n``.

    All record counts live in one flat buffer so that absorbing an instance
    is a single fancy-indexed add. Records handed out by ``records`` and
    ``record_for`` are live views, valid until the next ``retarget``.
    """

    def __init__(self, cards: Sequence[int], max_cells: int = DEFAULT_MAX_CELLS):
        self.cards = tuple(int(c) for c in cards)
        self.max_cells = max_cells
        self.n = 0
        self.records: dict[FamilyKey, StatisticsRecord] = {}
        self._flat = np.zeros(0)
        self._offsets = np.zeros(0, dtype=np.int64)
        self._index = np.zeros((len(self.cards), 0), dtype=np.int64)
        self._sources: dict[FamilyKey, FamilyKey | None] = {}

    # -- container protocol
    def __contains__(self, key) -> bool:
        return tuple(key) in self.records

    def __getitem__(self, key) -> StatisticsRecord:
        return self.records[tuple(key)]

    def __iter__(self) -> Iterator[StatisticsRecord]:
        return iter(self.records.values())

    def __len__(self):
        return len(self.records)

    def keys(self) -> set[FamilyKey]:
        return set(self.records)

    # -- layout
    def _cells(self, key: FamilyKey) -> int:
        size = math.prod(self.cards[v] for v in key)
        if size > self.max_cells:
            raise StructureError(
                f"family {key} needs {size} cells, above the limit of {self.max_cells}")
        return size

    def _relayout(self, records: dict[FamilyKey, StatisticsRecord]) -> None:
        keys = sorted(records, key=lambda k: (len(k), k))
        sizes = [records[k].size for k in keys]
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) if keys else np.zeros(0, np.int64)
        flat = np.zeros(int(sum(sizes)))
        index = np.zeros((len(self.cards), len(keys)), dtype=np.int64)
        self.records = {}
        for j, k in enumerate(keys):
            rec = records[k]
            view = flat[offsets[j]:offsets[j] + rec.size]
            view[:] = rec.counts
            rec.counts = view
            index[list(k), j] = _strides(k, self.cards)
            self.records[k] = rec
        self._flat, self._offsets, self._index = flat, offsets, index
        self._sources = {}

    def add_record(self, record: StatisticsRecord) -> None:
        if record.key in self.records:
            raise StructureError(f"record {record.key} already present")
        self._cells(record.key)
        records = dict(self.records)
        records[record.key] = record.copy()
        self._relayout(records)

    # -- updates
    def absorb(self, inst, weight: float = 1.0) -> None:
        """Add one complete instance with the given weight to every record."""
        if self.records:
            idx = self._offsets + np.asarray(inst, dtype=np.int64) @ self._index
            self._flat[idx] += weight
            for rec in self.records.values():
                rec.absorbed += weight
        if weight == 1:
            self.n += 1

    def decay(self, factor: float) -> None:
        """Scale every count and absorbed weight by ``factor``."""
        self._flat *= factor
        for rec in self.records.values():
            rec.absorbed *= factor

    def absorb_many(self, data) -> None:
        """Absorb rows of ``data`` with unit weight; equals repeated ``absorb``."""
        data = np.asarray(data, dtype=np.int64)
        if len(data) == 0:
            return
        if self.records:
            idx = (self._offsets + data @ self._index).ravel()
            self._flat += np.bincount(idx, minlength=self._flat.size)
            for rec in self.records.values():
                rec.absorbed += len(data)
        self.n += len(data)

    def retarget(self, keep: Iterable[FamilyKey], init=None) -> None:
        """Keep exactly the keys in ``keep``.

        Surviving keys keep their history. A new key that is a subset of a
        surviving record is initialized by marginalization (the survivor
        with the largest ``absorbed`` is used); other new keys get a fresh
        record from ``init(key)`` if given, else zero counts born at ``n``.
        """
        keep = {family_key(k) for k in keep}
        survivors = {k: r for k, r in self.records.items() if k in keep}
        records = {k: r.copy() for k, r in survivors.items()}
        for k in sorted(keep - set(survivors), key=lambda k: (len(k), k)):
            self._cells(k)
            src = self._best_container(k, survivors)
            if src is not None:
                records[k] = survivors[src].marginalize(k)
            elif init is not None:
                records[k] = init(k)
            else:
                records[k] = StatisticsRecord.for_key(k, self.cards, birth_index=self.n)
        self._relayout(records)

    # -- lookups
    @staticmethod
    def _best_container(key, records) -> FamilyKey | None:
        s = set(key)
        best = None
        for k, r in records.items():
            if s <= set(k):
                rank = (-r.absorbed, k != key, len(k), k)
                if best is None or rank < best[0]:
                    best = (rank, k)
        return None if best is None else best[1]

    def source_key(self, key: FamilyKey) -> FamilyKey | None:
        """Key of the record used to supply ``key``: the containing record
        (exact or superset) with the most absorbed weight."""
        key = tuple(key)
        try:
            return self._sources[key]
        except KeyError:
            src = self._best_container(key, self.records)
            self._sources[key] = src
            return src

    def can_supply(self, key: FamilyKey) -> bool:
        return self.source_key(key) is not None

    def record_for(self, key: FamilyKey) -> StatisticsRecord:
        key = tuple(key)
        src = self.source_key(key)
        if src is None:
            raise EvaluationError(f"no statistics record covers family {key}")
        rec = self.records[src]
        return rec if src == key else rec.marginalize(key)

    def memory_units(self) -> int:
        return int(self._flat.size)

    def dump(self) -> str:
        lines = []
        for k in sorted(self.records, key=lambda k: (len(k), k)):
            r = self.records[k]
            lines.append(f"record {','.join(map(str, k))} birth={r.birth_index} absorbed={r.absorbed:.17g}")
            lines.append(" ".join(f"{c:.17g}" for c in r.counts))
        return "\n".join(lines) + ("\n" if lines else "")


def can_evaluate(structure, store) -> bool:
    return all(store.can_supply(k) for k in suff(structure))


def absorb(store: StatisticsStore, inst, weight: float = 1.0) -> None:
    store.absorb(inst, weight)


def retarget(store: StatisticsStore, keep: Iterable[FamilyKey]) -> None:
    store.retarget(keep)


def memory_units(store: StatisticsStore) -> int:
    return store.memory_units()
