"""Sequential structure learners: Naive, MAP and Incremental.

Each learner reads a stream one instance at a time, refreshes its
parameters after every instance and reconsiders the structure every ``k``
instances. They differ in what they keep about the past:

* Naive keeps every instance and reruns hill climbing on all of them.
* MAP keeps the last window plus the current network, which stands in for
  the earlier data as ``prior_weight`` pseudo-instances.
* Incremental keeps only the statistics records needed to score the
  current structure and its neighbors (the search frontier).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .exceptions import ConfigError, EvaluationError, StructureError
from .network import BayesianNetwork, NetworkStructure, VariableTable, uniform_network
from .scoring import DataSource, ScoreConfig, mle_parameters, predictive_log_prob, total_score
from .search import compute_frontier, frontier_keys, hill_climb
from .statstore import StatisticsRecord, StatisticsStore, count_family, suff

__all__ = [
    "STRATEGIES",
    "LearnerConfig",
    "SequentialLearner",
    "NaiveLearner",
    "MapLearner",
    "IncrementalLearner",
    "PseudoCountSource",
    "make_learner",
    "naive_update",
    "map_update",
]

STRATEGIES = ("naive", "map", "incremental")
DEFAULT_SCORES = {"naive": "bde", "map": "bde", "incremental": "avg-bde", "em": "avg-bde"}


@dataclass(frozen=True)
class LearnerConfig:
    strategy: str = "incremental"
    k: int = 100
    score: ScoreConfig | None = None
    prior_ess: float = 5.0
    width: int = 1
    max_parents: int = 5
    # MAP only: cap on the pseudo-instance weight given to the prior network.
    map_weight_cap: float | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES + ("em",):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.prior_ess < 0:
            raise ConfigError("prior_ess must be non-negative")
        if self.width < 1 or self.max_parents < 0:
            raise ConfigError("width must be >= 1 and max_parents >= 0")
        if self.score is None:
            object.__setattr__(self, "score", ScoreConfig(DEFAULT_SCORES[self.strategy]))


def _check_complete(inst, cards) -> np.ndarray:
    inst = np.asarray(inst, dtype=np.int64)
    if inst.shape != (len(cards),) or np.any(inst < 0) or np.any(inst >= cards):
        raise StructureError("learner expects a complete, in-range instance")
    return inst


class SequentialLearner:
    """Shared stream loop; subclasses supply statistics and structure updates."""

    strategy = ""

    def __init__(self, variables: VariableTable, config: LearnerConfig | None = None,
                 initial: BayesianNetwork | None = None):
        config = config or LearnerConfig(self.strategy)
        if initial is not None and initial.variables != variables:
            raise StructureError("initial network has a different variable table")
        self.variables = variables
        self.config = config
        self.cards = np.asarray(variables.cards, dtype=np.int64)
        self.n = 0
        self.initial = initial
        self.structure = initial.structure if initial is not None else NetworkStructure.empty(len(variables))
        self.history: list[tuple[int, NetworkStructure]] = []
        self._network: BayesianNetwork | None = None

    # -- stream interface
    def observe(self, inst) -> None:
        """Absorb one instance and, every ``k`` instances, update the structure."""
        inst = self._validate(inst)
        self._absorb(inst)
        self.n += 1
        self._network = None
        if self.n % self.config.k == 0:
            self._update_structure()
            self.history.append((self.n, self.structure))

    def step(self, inst) -> BayesianNetwork:
        self.observe(inst)
        return self.network

    @property
    def network(self) -> BayesianNetwork:
        """Current model; parameters come from ``statistics()``."""
        if self._network is None:
            if self.n == 0 and self.initial is not None:
                self._network = self.initial
            else:
                self._network = mle_parameters(self.structure, self.statistics(),
                                               self.config.prior_ess, self.variables)
        return self._network

    def log_prob(self, inst) -> float:
        """``log P(inst)`` under the current model (fast path, no CPT build)."""
        if self.n == 0 and self.initial is not None:
            return self.initial.log_prob(inst)
        return predictive_log_prob(self.structure, self.statistics(), inst,
                                   self.config.prior_ess, self.variables.cards)

    # -- subclass hooks
    def _validate(self, inst) -> np.ndarray:
        return _check_complete(inst, self.cards)

    def _absorb(self, inst) -> None:
        raise NotImplementedError

    def _update_structure(self) -> None:
        raise NotImplementedError

    def statistics(self):
        """Source of the family counts that parameterize the current model."""
        raise NotImplementedError

    def memory_units(self) -> int:
        raise NotImplementedError


# --- Naive -----------------------------------------------------------------

def naive_update(data: np.ndarray, previous: NetworkStructure, cards: Sequence[int],
                 config: LearnerConfig) -> NetworkStructure:
    """Hill climbing from ``previous`` with counts taken from all of ``data``."""
    if len(data) == 0:
        return previous
    return hill_climb(previous, DataSource(data, cards), config.score, config.max_parents)


class NaiveLearner(SequentialLearner):
    strategy = "naive"

    def __init__(self, variables, config=None, initial=None):
        super().__init__(variables, config, initial)
        self._buffer = np.zeros((64, len(variables)), dtype=np.int64)
        self._params = self._param_store()

    @property
    def data(self) -> np.ndarray:
        return self._buffer[:self.n]

    def _param_store(self) -> StatisticsStore:
        store = StatisticsStore(self.variables.cards)
        store.retarget(suff(self.structure))
        store.absorb_many(self.data)
        return store

    def _absorb(self, inst):
        if self.n == len(self._buffer):
            self._buffer = np.concatenate([self._buffer, np.zeros_like(self._buffer)])
        self._buffer[self.n] = inst
        self._params.absorb(inst)

    def _update_structure(self):
        new = naive_update(self.data, self.structure, self.variables.cards, self.config)
        if new != self.structure:
            self.structure = new
            self._params = self._param_store()

    def statistics(self):
        return self._params

    def memory_units(self) -> int:
        return self.n * len(self.variables)


# --- MAP -------------------------------------------------------------------

class PseudoCountSource:
    """Counts of ``weight`` pseudo-instances drawn from ``prior`` plus real data.

    The pseudo part of a family record is ``weight * P_prior(family)``,
    computed by exact inference on the prior network.
    """

    def __init__(self, prior: BayesianNetwork, weight: float, data, cards):
        self.prior = prior
        self.weight = float(weight)
        self.data = np.asarray(data, dtype=np.int64).reshape(-1, len(cards))
        self.cards = tuple(cards)
        self._cache = {}

    def can_supply(self, key) -> bool:
        return True

    def pseudo_counts(self, key) -> np.ndarray:
        if self.weight == 0:
            return np.zeros(math.prod(self.cards[v] for v in key))
        return self.weight * self.prior.marginal(key).ravel(order="F")

    def record_for(self, key) -> StatisticsRecord:
        key = tuple(key)
        rec = self._cache.get(key)
        if rec is None:
            counts = self.pseudo_counts(key) + count_family(self.data, key, self.cards)
            rec = StatisticsRecord.for_key(key, self.cards, counts=counts,
                                           absorbed=self.weight + len(self.data))
            self._cache[key] = rec
        return rec


def map_update(prior: BayesianNetwork, prior_weight: float, buffer, previous: NetworkStructure,
               config: LearnerConfig) -> tuple[NetworkStructure, BayesianNetwork, float]:
    """One MAP window: score on prior pseudo-counts plus the buffer, climb,
    and return the new structure, the new prior network and its weight."""
    buffer = np.asarray(buffer, dtype=np.int64).reshape(-1, prior.n)
    source = PseudoCountSource(prior, prior_weight, buffer, prior.cards)
    structure = hill_climb(previous, source, config.score, config.max_parents)
    new_prior = mle_parameters(structure, source, config.prior_ess, prior.variables)
    weight = prior_weight + len(buffer)
    if config.map_weight_cap is not None:
        weight = min(weight, config.map_weight_cap)
    return structure, new_prior, weight


class MapLearner(SequentialLearner):
    strategy = "map"

    def __init__(self, variables, config=None, initial=None):
        super().__init__(variables, config, initial)
        self.prior = initial if initial is not None else uniform_network(variables, self.structure)
        self.prior_weight = 0.0
        self._buffer = np.zeros((self.config.k, len(variables)), dtype=np.int64)
        self._fill = 0
        self._params = self._param_store()

    @property
    def buffer(self) -> np.ndarray:
        return self._buffer[:self._fill]

    def _param_store(self) -> StatisticsStore:
        store = StatisticsStore(self.variables.cards)
        source = PseudoCountSource(self.prior, self.prior_weight, self.buffer, self.variables.cards)
        for key in suff(self.structure):
            store.add_record(source.record_for(key))
        store.n = self._fill
        return store

    def _absorb(self, inst):
        self._buffer[self._fill] = inst
        self._fill += 1
        self._params.absorb(inst)

    def _update_structure(self):
        self.structure, self.prior, self.prior_weight = map_update(
            self.prior, self.prior_weight, self.buffer, self.structure, self.config)
        self._fill = 0
        self._params = self._param_store()

    def statistics(self):
        return self._params

    def memory_units(self) -> int:
        return self._fill * len(self.variables) + self.prior.n_parameters()


# --- Incremental -----------------------------------------------------------

class IncrementalLearner(SequentialLearner):
    strategy = "incremental"

    def __init__(self, variables, config=None, initial=None):
        super().__init__(variables, config, initial)
        self.store = StatisticsStore(variables.cards)
        self.frontier = self._frontier(self.structure)
        self._retarget(frontier_keys(self.frontier))

    def _frontier(self, structure):
        if self.config.width == 1:
            return compute_frontier(structure, 1, self.config.max_parents)

        def rank(g):
            try:
                return total_score(g, self.store, self.config.score)
            except EvaluationError:
                return -math.inf
        return compute_frontier(structure, self.config.width, self.config.max_parents, rank)

    def _retarget(self, keys):
        self.store.retarget(keys)

    def _absorb(self, inst):
        self.store.absorb(inst)

    def _update_structure(self):
        self.structure = hill_climb(self.structure, self.store, self.config.score,
                                    self.config.max_parents)
        self.frontier = self._frontier(self.structure)
        self._retarget(frontier_keys(self.frontier))

    def statistics(self):
        return self.store

    def memory_units(self) -> int:
        return self.store.memory_units()


_LEARNERS = {"naive": NaiveLearner, "map": MapLearner, "incremental": IncrementalLearner}


def make_learner(variables: VariableTable, config: LearnerConfig,
                 initial: BayesianNetwork | None = None) -> SequentialLearner:
    if config.strategy == "em":
        raise ConfigError("use seqbn.em.EmLearner for the EM strategy")
    return _LEARNERS[config.strategy](variables, config, initial)


def with_strategy(config: LearnerConfig, strategy: str) -> LearnerConfig:
    return replace(config, strategy=strategy, score=None)
