import logging

import numpy as np
import pytest

from oracles import enum_marginal
from seqbn import networks
from seqbn.em import EmConfig, EmLearner, em_absorb, expected_record, init_expected
from seqbn.exceptions import ConfigError, StructureError
from seqbn.learners import IncrementalLearner, LearnerConfig
from seqbn.network import MISSING, VariableTable, parse_network, uniform_network
from seqbn.statstore import StatisticsStore


def store_for(cards, keys):
    s = StatisticsStore(cards)
    s.retarget(keys)
    return s


def test_config_validation():
    with pytest.raises(ConfigError):
        EmConfig(n0=0)
    with pytest.raises(ConfigError):
        EmConfig(alpha=0)
    with pytest.raises(ConfigError):
        EmConfig(alpha=1.01)
    with pytest.raises(ConfigError):
        EmConfig(fresh="half")


def test_init_expected_uniform_pair():
    net = uniform_network(VariableTable(("A", "B"), (2, 2)))
    s = store_for(net.cards, [(0, 1)])
    init_expected(s, net, 4.0)
    assert s[(0, 1)].counts.tolist() == [1, 1, 1, 1]
    assert s[(0, 1)].absorbed == 4


def test_init_expected_zero_cell():
    net = parse_network("vars 2\nvar A 2\nvar B 2\nparents A\nparents B A\ncpt A\n0.5 0.5\ncpt B\n1 0\n0.5 0.5\n")
    s = store_for(net.cards, [(0, 1)])
    init_expected(s, net, 10.0)
    table = s[(0, 1)].table()
    assert table[0, 1] == 0
    assert table[0, 0] == pytest.approx(5.0)


def test_init_expected_matches_enumeration(chain):
    s = store_for(chain.cards, [(0, 2), (0, 1, 2), (1,)])
    init_expected(s, chain, 7.0)
    for rec in s:
        t = rec.table()
        for idx in np.ndindex(t.shape):
            expect = 7.0 * enum_marginal(chain, dict(zip(rec.key, idx)))
            assert t[idx] == pytest.approx(expect)


def test_complete_instance_alpha_one_is_hard_absorb(chain, rng):
    keys = [(0, 1), (1, 2), (0, 1, 2)]
    a, b = store_for(chain.cards, keys), store_for(chain.cards, keys)
    for u in chain.sample(rng, 50):
        assert em_absorb(a, u, chain, 1.0)
        b.absorb(u)
    for k in keys:
        assert np.array_equal(a[k].counts, b[k].counts)
        assert a[k].absorbed == b[k].absorbed
    assert a.n == b.n == 50


def test_fully_missing_adds_model_marginals(chain):
    s = store_for(chain.cards, [(0, 2), (1,)])
    em_absorb(s, [MISSING] * 3, chain, 0.9)
    for rec in s:
        assert np.allclose(rec.table(), chain.marginal(rec.key))
        assert rec.absorbed == 1


def test_partial_instance_posteriors_match_enumeration(chain):
    s = store_for(chain.cards, [(0, 1), (0, 1, 2), (0,)])
    y = [MISSING, MISSING, 1]
    em_absorb(s, y, chain, 1.0)
    for rec in s:
        t = rec.table()
        for idx in np.ndindex(t.shape):
            target = dict(zip(rec.key, idx))
            if target.get(2, 1) != 1:
                assert t[idx] == 0
                continue
            assert t[idx] == pytest.approx(enum_marginal(chain, target, {2: 1}))


def test_decay_recurrence(chain, rng):
    s = store_for(chain.cards, [(0, 1), (2,)])
    init_expected(s, chain, 10.0)
    alpha = 0.97
    data = chain.sample(rng, 200)
    mask = rng.random(data.shape) < 0.3
    for m, u in enumerate(np.where(mask, MISSING, data), start=1):
        em_absorb(s, u, chain, alpha)
        expect = 10.0 * alpha ** m + (1 - alpha ** m) / (1 - alpha)
        for rec in s:
            assert rec.absorbed == pytest.approx(expect, rel=1e-12)
            assert rec.counts.sum() == pytest.approx(rec.absorbed, abs=1e-6)
            assert np.all(rec.counts >= 0)


def test_records_stay_consistent_in_lockstep(chain, rng):
    s = store_for(chain.cards, [(0, 1, 2), (0, 2), (1,)])
    init_expected(s, chain, 5.0)
    data = chain.sample(rng, 100)
    model = networks.load("chain3")
    for u in np.where(rng.random(data.shape) < 0.4, MISSING, data):
        em_absorb(s, u, model, 0.99)
    full = s[(0, 1, 2)]
    for key in [(0, 2), (1,)]:
        assert np.allclose(full.marginalize(key).counts, s[key].counts)


def test_zero_evidence_skipped_with_warning(caplog):
    net = parse_network("vars 2\nvar A 2\nvar B 2\nparents A\nparents B A\ncpt A\n1 0\ncpt B\n0.5 0.5\n0.5 0.5\n")
    s = store_for(net.cards, [(0, 1)])
    init_expected(s, net, 2.0)
    before = s[(0, 1)].counts.copy()
    with caplog.at_level(logging.WARNING, logger="seqbn.em"):
        assert not em_absorb(s, [1, MISSING], net, 0.9)
    assert "zero probability" in caplog.text
    assert np.array_equal(s[(0, 1)].counts, before) and s.n == 0


def test_expected_record_birth_and_weight(chain):
    rec = expected_record((0, 2), chain, 3.0, birth_index=40)
    assert rec.birth_index == 40 and rec.absorbed == 3.0
    assert rec.counts.sum() == pytest.approx(3.0)


def test_learner_accepts_missing_and_rejects_out_of_range(chain):
    learner = EmLearner(chain.variables)
    learner.observe([MISSING, 1, MISSING])
    assert learner.n == 1
    with pytest.raises(StructureError):
        learner.observe([0, 2, 0])
    with pytest.raises(StructureError):
        learner.observe([0, -2, 0])


def test_alpha_one_complete_stream_matches_incremental(rng):
    net = networks.load("diamond4")
    data = net.sample(rng, 2000)
    inc = IncrementalLearner(net.variables, LearnerConfig("incremental", k=100))
    em = EmLearner(net.variables, EmConfig(n0=1e-9, alpha=1.0, k=100, fresh="zero"))
    for u in data:
        inc.observe(u)
        em.observe(u)
    assert em.history == inc.history
    assert em.network.allclose(inc.network, atol=1e-6)


def test_absorbed_converges_to_geometric_limit(rng):
    net = networks.load("diamond4")
    em = EmLearner(net.variables, EmConfig(alpha=0.99))
    data = net.sample(rng, 1000)
    for u in np.where(rng.random(data.shape) < 0.1, MISSING, data):
        em.observe(u)
    for rec in em.store:
        assert rec.absorbed == pytest.approx(100.0, rel=0.01)


@pytest.mark.parametrize("policy", ["sibling", "n0", "zero"])
def test_fresh_record_policies(policy, rng):
    net = networks.load("chain3")
    em = EmLearner(net.variables, EmConfig(alpha=0.95, k=50, fresh=policy))
    keys_before = None
    for j, u in enumerate(net.sample(rng, 400)):
        if em.n % 50 == 49:
            keys_before = em.store.keys()
            weights = {r.key: r.absorbed for r in em.store}
        em.observe(u)
        if em.n % 50 == 0 and keys_before is not None:
            for key in em.store.keys() - keys_before:
                rec = em.store[key]
                if any(set(key) <= set(k) for k in keys_before & em.store.keys()):
                    continue  # marginalized from a survivor
                want = {"sibling": max(weights.values()) * 0.95 + 1, "n0": 10.0, "zero": 0.0}[policy]
                assert rec.absorbed == pytest.approx(want)


def test_partial_log_prob_sums_out_missing(chain):
    em = EmLearner(chain.variables, initial=chain)
    em.observe([0, 1, 1])
    model = em.network
    p = sum(np.exp(model.log_prob([x, 1, z])) for x in (0, 1) for z in (0, 1))
    assert em.log_prob([MISSING, 1, MISSING]) == pytest.approx(np.log(p))
    assert em.log_prob([0, 1, 1]) == pytest.approx(model.log_prob([0, 1, 1]))
