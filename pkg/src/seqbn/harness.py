"""Experiment driver: dataset files, sampling with MCAR masking, the
strategy x k x dataset grid, and single-stream learning runs.

Every output is a function of the inputs and the recorded seeds.
"""
from __future__ import annotations

import csv
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import networks
from .em import EmConfig, EmLearner
from .evaluation import (FORMAT_LINE, LossTrace, average_windows, prequential_run, windowed_average,
                         write_trace, write_windowed)
from .exceptions import ConfigError, ParseError, SchemaError
from .learners import LearnerConfig, make_learner
from .network import MISSING, BayesianNetwork, VariableTable, read_network, write_network
from .scoring import ScoreConfig

__all__ = [
    "resolve_network",
    "write_dataset",
    "read_dataset",
    "format_dataset",
    "parse_dataset",
    "sample_dataset",
    "mask_mcar",
    "build_learner",
    "ExperimentSpec",
    "CellResult",
    "run_cell",
    "run_experiment",
    "learn",
]

log = logging.getLogger(__name__)

ALL_STRATEGIES = ("naive", "map", "incremental", "em")


def resolve_network(ref) -> BayesianNetwork:
    """A network from a file path or the name of a shipped network."""
    if isinstance(ref, BayesianNetwork):
        return ref
    path = Path(ref)
    if path.exists():
        return read_network(path)
    if str(ref) in networks.NAMES:
        return networks.load(str(ref))
    raise FileNotFoundError(f"no network file or shipped network named {ref!r}")


# --- datasets ----------------------------------------------------------------

def format_dataset(variables: VariableTable, data) -> str:
    data = np.asarray(data, dtype=np.int64).reshape(-1, len(variables))
    lines = [FORMAT_LINE, ",".join(f"{n}:{c}" for n, c in zip(variables.names, variables.cards))]
    for row in data:
        lines.append(",".join("?" if v == MISSING else str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_dataset(path, variables: VariableTable, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_dataset(variables, data), encoding="utf-8")


def parse_dataset(text: str, variables: VariableTable | None = None) -> tuple[VariableTable, np.ndarray]:
    """Parse the dataset format; ``?`` becomes ``MISSING``.

    With ``variables`` given, the header must match it exactly.
    """
    header, rows, header_line = None, [], 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            try:
                pairs = [(name, int(card)) for name, card in (f.rsplit(":", 1) for f in fields)]
                header = VariableTable.from_pairs(pairs)
            except (ValueError, TypeError) as exc:
                raise ParseError(f"bad dataset header: {exc}", lineno) from None
            header_line = lineno
            continue
        if len(fields) != len(header):
            raise SchemaError(f"line {lineno}: {len(fields)} fields, expected {len(header)}")
        row = []
        for f, card in zip(fields, header.cards):
            if f == "?":
                row.append(MISSING)
                continue
            try:
                v = int(f)
            except ValueError:
                raise ParseError(f"bad value {f!r}", lineno) from None
            if not 0 <= v < card:
                raise SchemaError(f"line {lineno}: value {v} out of range for cardinality {card}")
            row.append(v)
        rows.append(row)
    if header is None:
        raise ParseError("dataset has no header line", header_line or 1)
    if variables is not None and header != variables:
        raise SchemaError(f"dataset variables {list(zip(header.names, header.cards))} do not match "
                          f"the network's {list(zip(variables.names, variables.cards))}")
    data = np.asarray(rows, dtype=np.int64).reshape(-1, len(header))
    return header, data


def read_dataset(path, variables: VariableTable | None = None) -> tuple[VariableTable, np.ndarray]:
    return parse_dataset(Path(path).read_text(encoding="utf-8"), variables)


def mask_mcar(data, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Replace each value by ``MISSING`` independently with probability ``rate``."""
    if not 0 <= rate < 1:
        raise ConfigError("missingness rate must lie in [0, 1)")
    data = np.asarray(data, dtype=np.int64)
    if rate == 0:
        return data.copy()
    return np.where(rng.random(data.shape) < rate, MISSING, data)


def sample_dataset(net: BayesianNetwork, count: int, seed: int,
                   missing: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """``(complete, masked)`` instances; the mask draws follow the samples
    on the same generator, so the complete part does not depend on ``missing``."""
    if count < 0:
        raise ConfigError("count must be non-negative")
    rng = np.random.default_rng(seed)
    complete = net.sample(rng, count)
    return complete, mask_mcar(complete, missing, rng)


# --- learners ------------------------------------------------------------------

def build_learner(strategy: str, variables: VariableTable, k: int = 100, score: str | None = None,
                  ess: float = 5.0, max_parents: int = 5, alpha: float = 0.99, n0: float = 10.0,
                  fresh: str = "sibling", initial: BayesianNetwork | None = None):
    score_cfg = None if score is None else ScoreConfig(score, ess)
    if strategy == "em":
        return EmLearner(variables, EmConfig(n0=n0, alpha=alpha, k=k, score=score_cfg, prior_ess=ess,
                                             max_parents=max_parents, fresh=fresh), initial)
    if strategy not in ALL_STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    if score_cfg is None:
        cfg = LearnerConfig(strategy, k, prior_ess=ess, max_parents=max_parents)
        cfg = replace(cfg, score=ScoreConfig(cfg.score.kind, ess))
    else:
        cfg = LearnerConfig(strategy, k, score_cfg, prior_ess=ess, max_parents=max_parents)
    return make_learner(variables, cfg, initial)


# --- experiment grid -------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    network: str
    out: str
    strategies: tuple[str, ...] = ("naive", "map", "incremental")
    ks: tuple[int, ...] = (100,)
    score: str | None = None
    ess: float = 5.0
    alpha: float = 0.99
    n0: float = 10.0
    fresh: str = "sibling"
    max_parents: int = 5
    n_datasets: int = 5
    n_instances: int = 10_000
    seeds: tuple[int, ...] | None = None
    missing: float = 0.0
    window: int = 250
    workers: int = 1

    def __post_init__(self):
        if self.seeds is None:
            object.__setattr__(self, "seeds", tuple(range(self.n_datasets)))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if len(self.seeds) != self.n_datasets:
            raise ConfigError("need exactly one seed per dataset")
        if not 0 <= self.missing < 1:
            raise ConfigError("missingness rate must lie in [0, 1)")
        bad = [s for s in self.strategies if s not in ALL_STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}")
        if self.missing > 0 and any(s != "em" for s in self.strategies):
            raise ConfigError("only the em strategy accepts missing values")
        if self.n_instances < 0 or self.window < 1 or any(k < 1 for k in self.ks):
            raise ConfigError("n_instances must be >= 0, window and k >= 1")


@dataclass
class CellResult:
    strategy: str
    k: int
    seed: int
    status: str = "ok"
    error: str = ""
    n: int = 0
    final_window_normloss: float = math.nan
    mean_normloss: float = math.nan
    peak_memory: int = 0
    final_memory: int = 0
    trace_path: str = ""
    windows: object = field(default=None, repr=False)


def _cell_name(strategy, k, seed):
    return f"{strategy}_k{k}_seed{seed}"


def run_cell(spec: ExperimentSpec, strategy: str, k: int, seed: int) -> CellResult:
    """Run one (strategy, k, dataset) cell and write its trace and final network."""
    res = CellResult(strategy, k, seed)
    out = Path(spec.out)
    trace = LossTrace()
    try:
        net = resolve_network(spec.network)
        complete, masked = sample_dataset(net, spec.n_instances, seed, spec.missing)
        learner = build_learner(strategy, net.variables, k, spec.score, spec.ess, spec.max_parents,
                                spec.alpha, spec.n0, spec.fresh)
        prequential_run(learner, masked, net, complete, trace)
        write_network(learner.network, out / "networks" / f"{_cell_name(strategy, k, seed)}.net")
    except Exception as exc:  # keep what was computed; the caller reports failure
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
        log.error("cell %s failed\n%s", _cell_name(strategy, k, seed), traceback.format_exc())
    path = out / "traces" / f"{_cell_name(strategy, k, seed)}.csv"
    write_trace(trace, path)
    res.trace_path = str(path)
    res.n = len(trace)
    if len(trace):
        windows = windowed_average(trace.normloss, spec.window)
        res.windows = windows
        res.final_window_normloss = float(windows.means[-1])
        res.mean_normloss = float(np.mean(trace.normloss))
        res.peak_memory = max(trace.memory)
        res.final_memory = trace.memory[-1]
    return res


def _run_cell_args(args):
    return run_cell(*args)


SUMMARY_COLUMNS = ("strategy", "k", "seed", "status", "n", "final_window_normloss", "final_window_normloss_bits",
                   "mean_normloss", "peak_memory", "final_memory", "error")


def write_summary(results: Sequence[CellResult], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(FORMAT_LINE + "\n")
        w = csv.writer(f, delimiter="\t", lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow([r.strategy, r.k, r.seed, r.status, r.n, repr(r.final_window_normloss),
                        repr(r.final_window_normloss / math.log(2.0)), repr(r.mean_normloss),
                        r.peak_memory, r.final_memory, r.error])


def run_experiment(spec: ExperimentSpec) -> tuple[list[CellResult], bool]:
    """Run the grid. Returns the cell results and whether every cell succeeded.

    Writes ``traces/<cell>.csv``, ``networks/<cell>.net``,
    ``windowed/<strategy>_k<k>.csv`` (averaged over datasets) and
    ``summary.tsv`` under ``spec.out``.
    """
    jobs = [(spec, s, k, seed) for s in spec.strategies for k in spec.ks for seed in spec.seeds]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [run_cell(*job) for job in jobs]
    out = Path(spec.out)
    for s in spec.strategies:
        for k in spec.ks:
            series = [r.windows for r in results if r.strategy == s and r.k == k and r.windows is not None]
            if series:
                write_windowed(average_windows(series), out / "windowed" / f"{s}_k{k}.csv")
    write_summary(results, out / "summary.tsv")
    return results, all(r.status == "ok" for r in results)


# --- single stream ---------------------------------------------------------------

def learn(dataset, out, strategy: str = "incremental", network=None, truth=None, k: int = 100,
          score: str | None = None, ess: float = 5.0, max_parents: int = 5, alpha: float = 0.99,
          n0: float = 10.0, fresh: str = "sibling") -> tuple[BayesianNetwork, LossTrace]:
    """Stream a dataset file through one learner.

    ``network`` (path, name or object) supplies the initial network and the
    variable table the dataset must match; ``truth`` enables the normalized
    loss column. Writes ``network.net`` and ``trace.csv`` into ``out``.
    Rows with missing values are accepted only by the em strategy, and their
    log-loss is taken on the observed values.
    """
    initial = resolve_network(network) if network is not None else None
    pstar = resolve_network(truth) if truth is not None else None
    expected = initial.variables if initial is not None else (pstar.variables if pstar is not None else None)
    variables, data = read_dataset(dataset, expected)
    if np.any(data == MISSING) and strategy != "em":
        raise SchemaError("dataset has missing values; use the em strategy")
    learner = build_learner(strategy, variables, k, score, ess, max_parents, alpha, n0, fresh, initial)
    trace = LossTrace()
    for u in data:
        partial = bool(np.any(u == MISSING))
        ll = learner.log_prob(u)
        ref = math.nan
        if pstar is not None:
            ref = pstar.log_prob(u) if not partial else float(np.log(
                pstar.joint[tuple(slice(None) if v == MISSING else int(v) for v in u)].sum()))
        learner.observe(u)
        trace.append(learner.n, -ll, ref - ll, learner.memory_units())
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    final = learner.network
    write_network(final, out / "network.net")
    write_trace(trace, out / "trace.csv")
    return final, trace
