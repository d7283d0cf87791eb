"""Sequential structure learning for discrete Bayesian networks.

Three learners read a data stream one instance at a time and reconsider the
network structure every ``k`` instances: a Naive learner that keeps all
data, a MAP learner that summarizes the past by its current network, and an
Incremental learner that keeps only the sufficient statistics its search
frontier needs. An EM variant of the Incremental learner handles missing
values.
"""
from .em import EmConfig, EmLearner, em_absorb, init_expected
from .evaluation import LossTrace, kl_divergence, normalized_loss_term, prequential_run, windowed_average
from .exceptions import ConfigError, EvaluationError, ParseError, SchemaError, StructureError, ZeroEvidenceError
from .learners import IncrementalLearner, LearnerConfig, MapLearner, NaiveLearner, make_learner
from .network import (MISSING, BayesianNetwork, NetworkStructure, VariableTable, forward_sample, joint_log_prob,
                      marginal_conditional, parse_network, read_network, uniform_network, write_network)
from .scoring import DataSource, ScoreConfig, mle_parameters, total_score
from .search import compute_frontier, equivalent, hill_climb
from .statstore import StatisticsRecord, StatisticsStore, suff

__all__ = [
    "EmConfig", "EmLearner", "em_absorb", "init_expected", "LossTrace", "kl_divergence",
    "normalized_loss_term", "prequential_run", "windowed_average", "ConfigError", "EvaluationError",
    "ParseError", "SchemaError", "StructureError", "ZeroEvidenceError", "IncrementalLearner", "LearnerConfig",
    "MapLearner", "NaiveLearner", "make_learner", "MISSING", "BayesianNetwork", "NetworkStructure",
    "VariableTable", "forward_sample", "joint_log_prob", "marginal_conditional", "parse_network",
    "read_network", "uniform_network", "write_network", "DataSource", "ScoreConfig", "mle_parameters",
    "total_score", "compute_frontier", "equivalent", "hill_climb", "StatisticsRecord", "StatisticsStore",
    "suff",
]

__version__ = "0.1.0"
