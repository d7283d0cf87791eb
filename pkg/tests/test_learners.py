import numpy as np
import pytest

from oracles import all_dags, batch_mdl
from seqbn import networks
from seqbn.exceptions import ConfigError, StructureError
from seqbn.learners import (IncrementalLearner, LearnerConfig, MapLearner, NaiveLearner, PseudoCountSource,
                            make_learner, map_update, naive_update)
from seqbn.network import NetworkStructure, VariableTable, uniform_network
from seqbn.scoring import DataSource, ScoreConfig, mle_parameters
from seqbn.search import equivalent, hill_climb, structural_hamming_distance
from seqbn.statstore import can_evaluate

LEARNERS = [NaiveLearner, MapLearner, IncrementalLearner]


def test_config_validation():
    with pytest.raises(ConfigError):
        LearnerConfig("greedy")
    with pytest.raises(ConfigError):
        LearnerConfig("naive", k=0)
    assert LearnerConfig("naive").score.kind == "bde"
    assert LearnerConfig("incremental").score.kind == "avg-bde"
    with pytest.raises(ConfigError):
        make_learner(VariableTable(("A",), (2,)), LearnerConfig("em"))


@pytest.mark.parametrize("cls", LEARNERS)
def test_rejects_incomplete_or_bad_instances(cls):
    learner = cls(VariableTable(("A", "B"), (2, 2)))
    with pytest.raises(StructureError):
        learner.observe([0, -1])
    with pytest.raises(StructureError):
        learner.observe([0, 2])
    with pytest.raises(StructureError):
        learner.observe([0])


def test_one_instance_keeps_empty_structure():
    vt = VariableTable(("A", "B"), (2, 2))
    learner = IncrementalLearner(vt, LearnerConfig("incremental", k=1))
    learner.observe([1, 0])
    assert learner.structure == NetworkStructure.empty(2)
    assert learner.history == [(1, NetworkStructure.empty(2))]


@pytest.mark.parametrize("cls", LEARNERS)
def test_structure_changes_only_on_interval(cls, chain, rng):
    data = chain.sample(rng, 250)
    learner = cls(chain.variables, LearnerConfig(cls.strategy, k=100))
    seen = []
    for u in data:
        learner.observe(u)
        seen.append(learner.structure)
    # seen[j] is the structure after j + 1 instances
    for n in range(2, 251):
        if n % 100 != 0:
            assert seen[n - 1] == seen[n - 2]
    # parameters move with every instance
    before = learner.network
    learner.observe(data[0])
    assert not before.allclose(learner.network)


@pytest.mark.parametrize("cls", LEARNERS)
def test_emitted_model_valid_and_equals_mle_of_statistics(cls, rng):
    net = networks.load("mix5")
    data = net.sample(rng, 420)
    learner = cls(net.variables, LearnerConfig(cls.strategy, k=60))
    for j, u in enumerate(data):
        learner.observe(u)
        if j % 35 == 0:
            model = learner.network
            for t in model.tables:
                assert np.allclose(t.sum(axis=1), 1.0)
            expect = mle_parameters(learner.structure, learner.statistics(), 5.0, net.variables)
            assert model.allclose(expect, atol=1e-12)
            assert learner.log_prob(u) == pytest.approx(model.log_prob(u))


@pytest.mark.parametrize("cls", LEARNERS)
def test_initial_network_used_before_data(cls, chain):
    learner = cls(chain.variables, initial=chain)
    assert learner.network is chain
    assert learner.structure == chain.structure
    with pytest.raises(StructureError):
        cls(VariableTable(("P", "Q", "R"), (2, 2, 2)), initial=chain)


@pytest.mark.parametrize("cls", LEARNERS)
def test_deterministic(cls, rng):
    net = networks.load("diamond4")
    data = net.sample(rng, 500)

    def run():
        learner = cls(net.variables, LearnerConfig(cls.strategy, k=50))
        for u in data:
            learner.observe(u)
        return learner.history, learner.network

    h1, n1 = run()
    h2, n2 = run()
    assert h1 == h2 and n1 == n2


def test_naive_buffer_and_memory(chain, rng):
    learner = NaiveLearner(chain.variables)
    data = chain.sample(rng, 130)
    mem = []
    for u in data:
        learner.observe(u)
        mem.append(learner.memory_units())
    assert len(learner.data) == 130 and np.array_equal(learner.data, data)
    assert mem == [3 * n for n in range(1, 131)]


def test_naive_update_is_batch_hill_climb(chain, rng):
    data = chain.sample(rng, 300)
    cfg = LearnerConfig("naive")
    got = naive_update(data, NetworkStructure.empty(3), chain.cards, cfg)
    assert got == hill_climb(NetworkStructure.empty(3), DataSource(data, chain.cards), cfg.score)
    assert naive_update(data[:0], chain.structure, chain.cards, cfg) == chain.structure


def test_naive_identical_instances_give_empty_structure():
    data = np.tile([1, 0, 1], (200, 1))
    cards = (2, 2, 2)
    cfg = LearnerConfig("naive", score=ScoreConfig("mdl"))
    scores = {p: batch_mdl(data, p, cards) for p in all_dags(3)}
    best = max(scores.values())
    assert [p for p, s in scores.items() if s == best] == [((), (), ())]
    g = naive_update(data, NetworkStructure.empty(3), cards, cfg)
    assert g == NetworkStructure.empty(3)
    learner = NaiveLearner(VariableTable(("A", "B", "C"), cards), cfg)
    for u in data:
        learner.observe(u)
    model = learner.network
    for i, v in enumerate([1, 0, 1]):
        assert model.tables[i][0, v] > 0.98


def test_naive_mostly_independent_of_k(chain, rng):
    data = chain.sample(rng, 800)
    a = NaiveLearner(chain.variables, LearnerConfig("naive", k=100))
    b = NaiveLearner(chain.variables, LearnerConfig("naive", k=400))
    for u in data:
        a.observe(u)
        b.observe(u)
    assert a.structure == b.structure


def test_map_with_zero_weight_is_batch_learning(chain, rng):
    buf = chain.sample(rng, 100)
    cfg = LearnerConfig("map")
    prior = uniform_network(chain.variables)
    g, new_prior, w = map_update(prior, 0.0, buf, NetworkStructure.empty(3), cfg)
    assert g == hill_climb(NetworkStructure.empty(3), DataSource(buf, chain.cards), cfg.score)
    assert w == 100
    assert new_prior.allclose(mle_parameters(g, DataSource(buf, chain.cards), 5.0, chain.variables))


def test_map_strong_prior_keeps_prior_structure(chain, rng):
    noise = rng.integers(0, 2, size=(50, 3))
    g, _, w = map_update(chain, 1e6, noise, chain.structure, LearnerConfig("map"))
    assert g == chain.structure and w == 1e6 + 50
    capped = LearnerConfig("map", map_weight_cap=500.0)
    _, _, w = map_update(chain, 480.0, noise, chain.structure, capped)
    assert w == 500.0


def test_pseudo_counts_are_prior_marginals(chain, rng):
    buf = chain.sample(rng, 20)
    src = PseudoCountSource(chain, 40.0, buf, chain.cards)
    rec = src.record_for((0, 2))
    direct = DataSource(buf, chain.cards).record_for((0, 2)).counts
    assert np.allclose(rec.counts, 40.0 * chain.marginal((0, 2)).ravel(order="F") + direct)
    assert rec.absorbed == 60


def test_map_buffer_and_memory_bound(rng):
    net = networks.load("sparse8")
    learner = MapLearner(net.variables, LearnerConfig("map", k=100))
    for u in net.sample(rng, 450):
        learner.observe(u)
        assert len(learner.buffer) == learner.n % 100
        assert learner.memory_units() <= 100 * net.n + learner.prior.n_parameters()
    assert learner.prior_weight == 400


def test_incremental_state_invariants(rng):
    net = networks.load("mix5")
    learner = IncrementalLearner(net.variables, LearnerConfig("incremental", k=50))
    for u in net.sample(rng, 600):
        learner.observe(u)
        assert learner.structure in learner.frontier
        assert learner.frontier.current == learner.structure
        assert can_evaluate(learner.structure, learner.store)
        assert all(can_evaluate(h, learner.store) for h in learner.frontier)
    assert learner.memory_units() == learner.store.memory_units()


def test_incremental_forced_move_births_new_records():
    vt = VariableTable(("A", "B", "C"), (2, 2, 2))
    learner = IncrementalLearner(vt, LearnerConfig("incremental", k=100))
    rng = np.random.default_rng(5)
    for _ in range(99):
        a = int(rng.integers(0, 2))
        learner.observe([a, a, int(rng.integers(0, 2))])
    before = learner.store.keys()
    learner.observe([0, 0, 1])
    assert (0, 1) in learner.structure.edges()
    store = learner.store
    assert store[(0, 1)].birth_index == 0 and store[(0, 1)].absorbed == 100
    new = store.keys() - before
    assert new
    for key in store.keys():
        rec = store[key]
        if key in new:
            assert (rec.birth_index, rec.absorbed) == (100, 0)
        else:
            assert (rec.birth_index, rec.absorbed) == (0, 100)


def test_incremental_no_improvement_keeps_store(rng):
    vt = VariableTable(("A", "B"), (2, 2))
    learner = IncrementalLearner(vt, LearnerConfig("incremental", k=100))
    for u in rng.integers(0, 2, size=(100, 2)):
        learner.observe(u)
    before = learner.store.dump()
    assert learner.structure == NetworkStructure.empty(2)
    learner._update_structure()
    assert learner.store.dump() == before


def test_incremental_memory_stabilizes(chain, rng):
    learner = IncrementalLearner(chain.variables)
    data = chain.sample(rng, 6000)
    mem = []
    for u in data:
        learner.observe(u)
        mem.append(learner.memory_units())
    assert len(set(mem[1000:])) == 1


@pytest.mark.slow
def test_incremental_six_variable_within_two_shd_on_average():
    net = networks.load("six6")
    dists = []
    for seed in range(5):
        data = net.sample(np.random.default_rng(seed), 10_000)
        batch = hill_climb(NetworkStructure.empty(6), DataSource(data, net.cards), ScoreConfig("bde"))
        assert equivalent(batch, net.structure)
        learner = IncrementalLearner(net.variables)
        for u in data:
            learner.observe(u)
        dists.append(structural_hamming_distance(learner.structure, net.structure))
    assert np.mean(dists) <= 2
