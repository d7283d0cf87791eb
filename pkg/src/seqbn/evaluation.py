"""Prequential loss, normalized loss against a generating network, windowed
averages, exact KL by enumeration, and the trace CSV formats."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .exceptions import StructureError
from .network import MISSING, BayesianNetwork

__all__ = [
    "normalized_loss_term",
    "kl_divergence",
    "LossTrace",
    "WindowSeries",
    "windowed_average",
    "average_windows",
    "prequential_run",
    "write_trace",
    "read_trace",
    "write_windowed",
    "FORMAT_LINE",
]

FORMAT_LINE = "# format=1"


def normalized_loss_term(pstar: BayesianNetwork, model: BayesianNetwork, u) -> float:
    """``log P*(u) - log P_model(u)`` in nats (``inf`` if the model gives u zero mass)."""
    if pstar.variables != model.variables:
        raise StructureError("networks are over different variables")
    return pstar.log_prob(u) - model.log_prob(u)


def kl_divergence(pstar: BayesianNetwork, model: BayesianNetwork) -> float:
    """Exact ``D(P* || P_model)`` in nats by enumerating the joint."""
    if pstar.variables != model.variables:
        raise StructureError("networks are over different variables")
    p = pstar.joint.ravel()
    q = model.joint.ravel()
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    return float(np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))


@dataclass
class LossTrace:
    """Per-instance prequential record.

    ``logloss[j]`` is ``-log P_{B}(u)`` for the model emitted before the
    ``n[j]``-th instance was absorbed.
    """

    n: list = field(default_factory=list)
    logloss: list = field(default_factory=list)
    normloss: list = field(default_factory=list)
    memory: list = field(default_factory=list)

    def append(self, n: int, logloss: float, normloss: float, memory: int) -> None:
        if self.n and n != self.n[-1] + 1:
            raise ValueError(f"trace entry {n} does not follow {self.n[-1]}")
        self.n.append(int(n))
        self.logloss.append(float(logloss))
        self.normloss.append(float(normloss))
        self.memory.append(int(memory))

    def __len__(self):
        return len(self.n)

    @property
    def logloss_bits(self) -> np.ndarray:
        return np.asarray(self.logloss) / math.log(2.0)

    @property
    def normloss_bits(self) -> np.ndarray:
        return np.asarray(self.normloss) / math.log(2.0)


@dataclass(frozen=True)
class WindowSeries:
    starts: np.ndarray
    means: np.ndarray
    partial: bool  # last window shorter than ``window``


def windowed_average(values: Iterable[float], window: int = 250, first_index: int = 1) -> WindowSeries:
    """Means over consecutive non-overlapping windows.

    A trailing incomplete window is kept and flagged through ``partial``.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    if v.size == 0:
        return WindowSeries(np.zeros(0, dtype=np.int64), np.zeros(0), False)
    starts = np.arange(0, v.size, window)
    means = np.add.reduceat(v, starts) / np.diff(np.append(starts, v.size))
    return WindowSeries(starts + first_index, means, bool(v.size % window))


def average_windows(series: list[WindowSeries]) -> WindowSeries:
    """Pointwise mean of aligned window series (truncated to the shortest)."""
    if not series:
        raise ValueError("nothing to average")
    m = min(len(s.means) for s in series)
    means = np.mean([s.means[:m] for s in series], axis=0)
    longest = max(series, key=lambda s: len(s.means))
    partial = any(s.partial and len(s.means) == m for s in series)
    return WindowSeries(longest.starts[:m], means, partial)


def prequential_run(learner, data, pstar: BayesianNetwork | None = None,
                    complete=None, trace: LossTrace | None = None) -> LossTrace:
    """Stream ``data`` through ``learner``, scoring each instance first.

    Losses are taken on ``complete`` (defaults to ``data``) so a learner fed
    masked instances is judged on the full ones. Without ``pstar`` the
    normalized column is NaN.
    """
    data = np.asarray(data, dtype=np.int64)
    complete = data if complete is None else np.asarray(complete, dtype=np.int64)
    if complete.shape != data.shape:
        raise StructureError("complete data must match the streamed data's shape")
    if np.any(complete == MISSING):
        raise StructureError("loss needs complete instances")
    trace = trace if trace is not None else LossTrace()
    ref = pstar.log_prob_many(complete) if pstar is not None else np.full(len(data), np.nan)
    for j, (u, full) in enumerate(zip(data, complete)):
        n_before = learner.n
        ll = learner.log_prob(full)
        if learner.n != n_before:
            raise RuntimeError("learner absorbed data while being scored")
        learner.observe(u)
        trace.append(learner.n, -ll, ref[j] - ll, learner.memory_units())
    return trace


def _open_out(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def write_trace(trace: LossTrace, path) -> None:
    with _open_out(path) as f:
        f.write(FORMAT_LINE + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["n", "logloss", "normloss", "memory"])
        for row in zip(trace.n, trace.logloss, trace.normloss, trace.memory):
            w.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])


def read_trace(path) -> LossTrace:
    trace = LossTrace()
    with open(path, encoding="utf-8") as f:
        rows = [line for line in f if line.strip() and not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    if header != ["n", "logloss", "normloss", "memory"]:
        raise ValueError(f"unexpected trace header {header}")
    for r in reader:
        trace.append(int(r[0]), float(r[1]), float(r[2]), int(r[3]))
    return trace


def write_windowed(series: WindowSeries, path) -> None:
    with _open_out(path) as f:
        f.write(FORMAT_LINE + "\n")
        if series.partial:
            f.write("# last window is partial\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["window_start", "mean_normloss"])
        for s, m in zip(series.starts, series.means):
            w.writerow([int(s), repr(float(m))])
