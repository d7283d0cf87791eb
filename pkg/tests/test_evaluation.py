import math

import numpy as np
import pytest

from oracles import exact_kl
from seqbn import networks
from seqbn.em import EmLearner
from seqbn.evaluation import (LossTrace, WindowSeries, average_windows, kl_divergence, normalized_loss_term,
                              prequential_run, read_trace, windowed_average, write_trace, write_windowed)
from seqbn.exceptions import StructureError
from seqbn.learners import IncrementalLearner, LearnerConfig, NaiveLearner
from seqbn.network import MISSING, uniform_network


def mc_check(pstar, model, count, rng):
    data = pstar.sample(rng, count)
    terms = np.array([normalized_loss_term(pstar, model, u) for u in data])
    return terms.mean(), terms.std(ddof=1) / math.sqrt(count)


def test_identity_model_has_zero_loss(chain, rng):
    for u in chain.sample(rng, 50):
        assert normalized_loss_term(chain, chain, u) == 0


def test_different_variables_rejected(chain):
    with pytest.raises(StructureError):
        normalized_loss_term(chain, networks.load("chain3"), [0, 0, 0])


def test_kl_matches_enumeration_oracle(rng):
    for name in ("chain3", "mix5", "sparse8"):
        net = networks.load(name)
        uni = uniform_network(net.variables)
        assert kl_divergence(net, uni) == pytest.approx(exact_kl(net, uni), rel=1e-10)
        assert kl_divergence(net, net) == pytest.approx(0, abs=1e-12)


def test_uniform_model_estimate_within_three_se():
    net = networks.load("mix5")
    mean, se = mc_check(net, uniform_network(net.variables), 10_000, np.random.default_rng(7))
    assert abs(mean - kl_divergence(net, uniform_network(net.variables))) <= 3 * se


@pytest.mark.slow
def test_expected_loss_of_learned_model_is_kl():
    net = networks.load("net10")
    rng = np.random.default_rng(3)
    learner = NaiveLearner(net.variables)
    for u in net.sample(rng, 300):
        learner.observe(u)
    model = learner.network
    mean, se = mc_check(net, model, 50_000, rng)
    assert abs(mean - kl_divergence(net, model)) <= 3 * se


def test_worse_model_positive_on_average(rng):
    net = networks.load("diamond4")
    trace = LossTrace()
    uni = uniform_network(net.variables)
    for j, u in enumerate(net.sample(rng, 1000), start=1):
        trace.append(j, -uni.log_prob(u), normalized_loss_term(net, uni, u), 0)
    assert np.all(windowed_average(trace.normloss).means > 0)


def test_windowed_constant():
    w = windowed_average([0.3] * 1000, 250)
    assert np.allclose(w.means, 0.3)
    assert w.starts.tolist() == [1, 251, 501, 751] and not w.partial


def test_windowed_short_trace_is_single_partial():
    w = windowed_average([1.0, 2.0, 6.0], 250)
    assert w.means.tolist() == [3.0] and w.partial and w.starts.tolist() == [1]


def test_windowed_hand_computed():
    w = windowed_average([1, 2, 3, 4, 5, 6, 7], 3)
    assert w.means.tolist() == [2.0, 5.0, 7.0]
    assert w.starts.tolist() == [1, 4, 7] and w.partial
    assert windowed_average([], 3).means.size == 0
    with pytest.raises(ValueError):
        windowed_average([1.0], 0)


def test_average_windows_truncates_and_means():
    a = WindowSeries(np.array([1, 3, 5]), np.array([1.0, 2.0, 3.0]), False)
    b = WindowSeries(np.array([1, 3]), np.array([3.0, 4.0]), True)
    avg = average_windows([a, b])
    assert avg.means.tolist() == [2.0, 3.0] and avg.starts.tolist() == [1, 3] and avg.partial


def test_trace_requires_consecutive_n():
    t = LossTrace()
    t.append(1, 0.5, 0.1, 3)
    with pytest.raises(ValueError):
        t.append(3, 0.5, 0.1, 3)
    assert t.logloss_bits[0] == pytest.approx(0.5 / math.log(2))


class SpyLearner:
    """Wraps a learner and records the n at which each score was taken."""

    def __init__(self, inner):
        self.inner = inner
        self.scored_at = []

    @property
    def n(self):
        return self.inner.n

    def log_prob(self, u):
        self.scored_at.append(self.inner.n)
        return self.inner.log_prob(u)

    def observe(self, u):
        self.inner.observe(u)

    def memory_units(self):
        return self.inner.memory_units()


def test_prequential_discipline(chain, rng):
    data = chain.sample(rng, 300)
    spy = SpyLearner(IncrementalLearner(chain.variables, LearnerConfig("incremental", k=50)))
    trace = prequential_run(spy, data, chain)
    assert spy.scored_at == list(range(300))
    assert trace.n == list(range(1, 301))

    # replay: the model scored on u_n is the one learned from the first n-1 instances
    ref = IncrementalLearner(chain.variables, LearnerConfig("incremental", k=50))
    for j, u in enumerate(data):
        assert trace.logloss[j] == pytest.approx(-ref.network.log_prob(u))
        assert trace.normloss[j] == pytest.approx(chain.log_prob(u) - ref.network.log_prob(u))
        ref.observe(u)


def test_prequential_scores_on_complete_instances(chain, rng):
    data = chain.sample(rng, 40)
    masked = np.where(rng.random(data.shape) < 0.3, MISSING, data)
    trace = prequential_run(EmLearner(chain.variables), masked, chain, complete=data)
    assert len(trace) == 40 and np.all(np.isfinite(trace.normloss))
    with pytest.raises(StructureError):
        prequential_run(EmLearner(chain.variables), masked, chain)
    no_truth = prequential_run(NaiveLearner(chain.variables), data)
    assert np.all(np.isnan(no_truth.normloss))


def test_trace_round_trip(tmp_path, chain, rng):
    trace = prequential_run(NaiveLearner(chain.variables), chain.sample(rng, 30), chain)
    path = tmp_path / "sub" / "trace.csv"
    write_trace(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# format=1" and lines[1] == "n,logloss,normloss,memory"
    assert len(lines) == 32
    back = read_trace(path)
    assert back == trace


def test_windowed_file(tmp_path):
    path = tmp_path / "w.csv"
    write_windowed(windowed_average([1.0] * 10, 4), path)
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# format=1", "# last window is partial", "window_start,mean_normloss"]
    assert [l.split(",")[0] for l in lines[3:]] == ["1", "5", "9"]
