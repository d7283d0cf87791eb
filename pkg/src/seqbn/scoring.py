"""Decomposable MDL and BDe scores over statistics records.

All scores are higher-is-better. The MDL score is the negated description
length in bits. BDe is the log marginal likelihood (natural log) under a
Dirichlet prior built from an equivalent sample size and a prior network
(uniform unless one is given). The averaged variants divide each family's
score by the number of instances its record summarizes, which makes
families recorded over different stretches of the stream comparable.

Statistics come from any *source* exposing ``record_for(key)`` and
``can_supply(key)``; ``StatisticsStore`` is one, ``DataSource`` counts raw
data on demand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .exceptions import ConfigError, EvaluationError
from .network import BayesianNetwork, NetworkStructure, VariableTable
from .statstore import FamilyKey, StatisticsRecord, count_family

__all__ = [
    "SCORE_KINDS",
    "ScoreConfig",
    "DataSource",
    "family_matrix",
    "local_mdl",
    "local_bde",
    "local_avg",
    "local_score",
    "total_score",
    "mle_parameters",
    "predictive_log_prob",
]

SCORE_KINDS = ("mdl", "bde", "avg-mdl", "avg-bde")


@dataclass(frozen=True)
class ScoreConfig:
    kind: str = "bde"
    ess: float = 5.0
    prior: BayesianNetwork | None = None

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ConfigError(f"unknown score kind {self.kind!r}; choose from {SCORE_KINDS}")
        if not self.ess > 0:
            raise ConfigError("equivalent sample size must be positive")

    @property
    def base(self) -> str:
        return self.kind.removeprefix("avg-")

    @property
    def averaged(self) -> bool:
        return self.kind.startswith("avg-")


class DataSource:
    """Counts families on demand from a complete dataset held in memory."""

    def __init__(self, data, cards: Sequence[int]):
        self.data = np.asarray(data, dtype=np.int64)
        self.cards = tuple(cards)
        self._cache: dict[FamilyKey, StatisticsRecord] = {}

    def can_supply(self, key) -> bool:
        return True

    def record_for(self, key) -> StatisticsRecord:
        key = tuple(key)
        rec = self._cache.get(key)
        if rec is None:
            counts = count_family(self.data, key, self.cards)
            rec = StatisticsRecord.for_key(key, self.cards, counts=counts,
                                           absorbed=float(len(self.data)))
            self._cache[key] = rec
        return rec


def family_matrix(table: np.ndarray, key: Sequence[int], child: int) -> np.ndarray:
    """Reshape a family table (axes in key order) to ``(card_child, q)``.

    Columns enumerate parent configurations, lowest parent id fastest.
    """
    t = np.moveaxis(np.asarray(table), list(key).index(child), 0)
    return t.reshape(t.shape[0], -1, order="F")


def _n_params(counts: np.ndarray) -> int:
    r, q = counts.shape
    return (r - 1) * q


def local_mdl(counts: np.ndarray, n: float | None = None) -> float:
    """Negated MDL description length (bits) of one family.

    ``counts`` is the ``(r, q)`` family matrix and ``n`` the number of
    instances it summarizes (defaults to the count total).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if n is None:
        n = float(counts.sum())
    if n <= 0:
        return 0.0
    parent_totals = counts.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        loglik = float(np.sum(xlogy(counts, counts)) - np.sum(xlogy(parent_totals, parent_totals)))
    loglik /= math.log(2.0)
    log_n = math.log2(n) if n > 1 else 0.0
    return loglik - 0.5 * log_n * _n_params(counts)


def _alpha(counts_shape, ess, prior_matrix=None, floor=None):
    r, q = counts_shape
    if prior_matrix is None:
        alpha = np.full((r, q), ess / (r * q))
    else:
        alpha = ess * np.asarray(prior_matrix, dtype=np.float64)
    if floor is not None:
        alpha = np.maximum(alpha, floor)
    if np.any(alpha <= 0):
        raise ConfigError("Dirichlet hyperparameters must be positive")
    return alpha


def local_bde(counts: np.ndarray, ess: float = 5.0, prior_matrix: np.ndarray | None = None,
              floor: float | None = None) -> float:
    """Log marginal likelihood of one family under a Dirichlet prior.

    Hyperparameters are ``ess * P_prior(x, pa)``; ``prior_matrix`` holds the
    prior joint over the family in ``(r, q)`` layout (uniform if omitted).
    """
    counts = np.asarray(counts, dtype=np.float64)
    alpha = _alpha(counts.shape, ess, prior_matrix, floor)
    a_pa = alpha.sum(axis=0)
    n_pa = counts.sum(axis=0)
    return float(np.sum(gammaln(a_pa) - gammaln(a_pa + n_pa))
                 + np.sum(gammaln(alpha + counts) - gammaln(alpha)))


def local_avg(counts: np.ndarray, n: float, base: str, ess: float = 5.0,
              prior_matrix: np.ndarray | None = None) -> float:
    """Family score divided by the number of instances behind it.

    With no data the MDL average is 0 and the BDe average is the mean log
    prior predictive probability over the family's cells.
    """
    if base == "mdl":
        return local_mdl(counts, n) / n if n > 0 else 0.0
    if base != "bde":
        raise ConfigError(f"unknown base score {base!r}")
    if n <= 0:
        alpha = _alpha(np.shape(counts), ess, prior_matrix)
        return float(np.mean(np.log(alpha / alpha.sum(axis=0))))
    return local_bde(counts, ess, prior_matrix) / n


def _prior_matrix(cfg: ScoreConfig, key, child):
    if cfg.prior is None:
        return None
    return family_matrix(cfg.prior.marginal(key), key, child)


def local_score(record: StatisticsRecord, child: int, cfg: ScoreConfig) -> float:
    """Score of the family ``record.key`` with ``child`` as the child."""
    counts = family_matrix(record.table(), record.key, child)
    prior = _prior_matrix(cfg, record.key, child)
    if cfg.averaged:
        return local_avg(counts, record.absorbed, cfg.base, cfg.ess, prior)
    if cfg.base == "mdl":
        return local_mdl(counts, record.absorbed)
    return local_bde(counts, cfg.ess, prior)


def total_score(structure: NetworkStructure, source, cfg: ScoreConfig) -> float:
    terms = []
    for i in range(structure.n):
        key = structure.family(i)
        if not source.can_supply(key):
            raise EvaluationError(f"family {key} of variable {i} cannot be evaluated")
        terms.append(local_score(source.record_for(key), i, cfg))
    return math.fsum(terms)


def mle_parameters(structure: NetworkStructure, source, prior_ess: float,
                   variables: VariableTable) -> BayesianNetwork:
    """Smoothed maximum-likelihood CPTs from the source's family counts.

    ``theta(x|pa) = (N(x,pa) + ess/(r q)) / (N(pa) + ess/q)``.
    """
    tables = []
    for i in range(structure.n):
        key = structure.family(i)
        if not source.can_supply(key):
            raise EvaluationError(f"family {key} of variable {i} cannot be evaluated")
        counts = family_matrix(source.record_for(key).table(), key, i)
        r, q = counts.shape
        num = counts + prior_ess / (r * q)
        den = num.sum(axis=0)
        theta = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0 / r)
        tables.append(theta.T)
    return BayesianNetwork(variables, structure, tables)


def predictive_log_prob(structure: NetworkStructure, source, inst, prior_ess: float,
                        cards: Sequence[int]) -> float:
    """``log P(inst)`` under ``mle_parameters`` without building the CPTs."""
    total = 0.0
    for i in range(structure.n):
        rec = source.record_for(structure.family(i))
        j = rec.key.index(i)
        stride = math.prod(rec.shape[:j])
        r = cards[i]
        base = rec.index_of(inst) - int(inst[i]) * stride
        cells = rec.counts[base:base + r * stride:stride]
        q = rec.size // r
        num = cells[int(inst[i])] + prior_ess / (r * q)
        den = cells.sum() + prior_ess / q
        if den <= 0:
            total -= math.log(r)
        elif num <= 0:
            return -math.inf
        else:
            total += math.log(num / den)
    return total
