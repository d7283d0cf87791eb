"""Incremental EM over expected sufficient statistics, with structure search.

Each incoming (possibly partial) instance ``y`` decays every record by
``alpha`` and then adds the posterior ``P_B(x | y)`` of each cell under the
current model ``B``. Parameters are refreshed from the expected counts after
every instance, and every ``k`` instances the structure is re-selected by
hill climbing over the expected statistics, exactly as the Incremental
learner does with hard counts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, StructureError
from .learners import IncrementalLearner, LearnerConfig
from .network import MISSING, BayesianNetwork, VariableTable, uniform_network
from .scoring import ScoreConfig
from .statstore import StatisticsRecord, StatisticsStore

__all__ = ["EmConfig", "EmLearner", "init_expected", "em_absorb", "expected_record"]

log = logging.getLogger(__name__)

FRESH_POLICIES = ("sibling", "n0", "zero")


@dataclass(frozen=True)
class EmConfig:
    n0: float = 10.0
    alpha: float = 0.99
    k: int = 100
    score: ScoreConfig | None = None
    prior_ess: float = 5.0
    width: int = 1
    max_parents: int = 5
    # Weight of records created when the frontier moves: "sibling" matches
    # the surviving records' absorbed weight, "n0" uses n0, "zero" starts
    # them empty like the Incremental learner does.
    fresh: str = "sibling"

    def __post_init__(self):
        if not self.n0 > 0:
            raise ConfigError("n0 must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.fresh not in FRESH_POLICIES:
            raise ConfigError(f"fresh must be one of {FRESH_POLICIES}")

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig("em", self.k, self.score, self.prior_ess, self.width, self.max_parents)


def expected_record(key, net: BayesianNetwork, weight: float, birth_index: int = 0) -> StatisticsRecord:
    """Record holding ``weight * P_net(key)``."""
    counts = weight * net.marginal(key).ravel(order="F")
    return StatisticsRecord.for_key(key, net.cards, counts=counts, absorbed=weight,
                                    birth_index=birth_index)


def init_expected(store: StatisticsStore, net: BayesianNetwork, n0: float) -> None:
    """Set every record to ``n0`` pseudo-instances from ``net``."""
    for rec in store:
        rec.counts[:] = n0 * net.marginal(rec.key).ravel(order="F")
        rec.absorbed = float(n0)


def em_absorb(store: StatisticsStore, y, net: BayesianNetwork, alpha: float) -> bool:
    """Decay the store and add the posterior of ``y`` to every record.

    Returns False (leaving the store untouched) when ``P_net(y) = 0``.
    """
    y = np.asarray(y, dtype=np.int64)
    missing = [i for i in range(len(y)) if y[i] == MISSING]
    if not missing:
        store.decay(alpha)
        store.absorb(y)
        return True
    post = net.joint[tuple(slice(None) if v == MISSING else int(v) for v in y)]
    z = float(post.sum())
    if z <= 0.0:
        log.warning("skipping instance with zero probability under the current model: %s", y.tolist())
        return False
    post = post / z
    store.decay(alpha)
    for rec in store:
        drop = tuple(j for j, v in enumerate(missing) if v not in rec.key)
        m = post.sum(axis=drop) if drop else post
        idx = tuple(slice(None) if v in missing else int(y[v]) for v in rec.key)
        table = rec.table()
        table[idx] += m
        rec.absorbed += 1.0
    store.n += 1
    return True


class EmLearner(IncrementalLearner):
    """Incremental learner driven by expected counts; accepts ``MISSING`` values.

    Records created when the frontier moves are marginalized from a surviving
    record when possible. Otherwise they are filled from the current model
    with the weight chosen by ``EmConfig.fresh``.
    """

    strategy = "em"

    def __init__(self, variables: VariableTable, config: EmConfig | None = None,
                 initial: BayesianNetwork | None = None):
        self.em = config or EmConfig()
        self._model = initial if initial is not None else uniform_network(variables)
        self.skipped = 0
        super().__init__(variables, self.em.learner_config(), initial)

    @property
    def model(self) -> BayesianNetwork:
        """Model used to complete the next instance."""
        if self._model is None:
            self._model = self.network
        return self._model

    def _retarget(self, keys):
        policy = self.em.fresh
        if policy == "zero":
            self.store.retarget(keys)
        else:
            model = self.model
            if policy == "n0" or len(self.store) == 0:
                weight = self.em.n0
            else:
                weight = max(r.absorbed for r in self.store)
            self.store.retarget(keys, init=lambda k: expected_record(k, model, weight, self.store.n))
        self._network = None
        self._model = None

    def _validate(self, inst):
        inst = np.asarray(inst, dtype=np.int64)
        if inst.shape != (len(self.cards),) or np.any((inst < 0) & (inst != MISSING)) or np.any(inst >= self.cards):
            raise StructureError("instance has the wrong length or an out-of-range value")
        return inst

    def _absorb(self, inst):
        if not em_absorb(self.store, inst, self.model, self.em.alpha):
            self.skipped += 1
        self._model = None

    def log_prob(self, inst) -> float:
        inst = np.asarray(inst)
        if np.any(inst == MISSING):
            p = float(self.network.joint[tuple(slice(None) if v == MISSING else int(v) for v in inst)].sum())
            return float(np.log(p)) if p > 0 else -np.inf
        return super().log_prob(inst)
