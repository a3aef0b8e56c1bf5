import math
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import random_graph
from gcpn import tensor as T
from gcpn.env import STOP, ActionVec, State
from gcpn.errors import ConfigError, ContractError, IntegrityError
from gcpn.molgraph import node_features, permute, single_atom
from gcpn.nets import (Discriminator, GcpnConfig, GcpnPolicy, action_distributions, adversarial_reward,
                       build_batch, decode_arrays, encode_arrays, load_checkpoint, log_prob,
                       node_embeddings, normalized_adjacency, raw_adversarial, sample_action,
                       save_checkpoint, value)
from gcpn.nets.gcn import _aggregate, encode
from gcpn.nets.policy import ActionArrays
from gcpn.smiles import parse

SMALL = dict(layers=2, embed_dim=6, atom_cap=10)


def make_policy(seed=0, **kw):
    return GcpnPolicy.initialize(GcpnConfig(**{**SMALL, **kw}), np.random.default_rng(seed))


def randomize(params, rng, scale=0.5):
    for t in params.values():
        t.data = t.data + rng.normal(scale=scale, size=t.shape)


def test_config_validation():
    with pytest.raises(ConfigError):
        GcpnConfig(aggregation="median")
    with pytest.raises(ConfigError):
        GcpnConfig(layers=0)


def test_single_node_embedding_degenerate_normalization():
    pol = make_policy(layers=1, batch_norm=False)
    g = single_atom("N")
    X = node_embeddings(g, pol).data
    F = node_features(g)
    expected = sum(np.maximum(F @ pol.params[f"gcn0.w{i}"].data, 0) for i in range(3))
    np.testing.assert_allclose(X, expected, atol=1e-12)


def test_two_node_normalized_adjacency():
    adj = normalized_adjacency(parse("CC").bonds)
    np.testing.assert_allclose(adj[0], [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(adj[1], np.eye(2))


@pytest.mark.parametrize("bn, mode, tol", [(False, "eval", 1e-9), (True, "eval", 1e-6)])
def test_embedding_equivariance(bn, mode, tol, rng):
    pol = make_policy(batch_norm=bn)
    randomize(pol.params, rng)
    if bn:
        for st in pol.bn_states:
            st.running_mean = rng.normal(size=st.running_mean.shape)
            st.running_var = rng.uniform(0.5, 2, size=st.running_var.shape)
    for _ in range(5):
        g = random_graph(rng)
        perm = rng.permutation(g.n)
        h = permute(g, perm)
        X, Y = node_embeddings(g, pol, mode).data, node_embeddings(h, pol, mode).data
        # new node i is old node perm[i]
        np.testing.assert_allclose(Y, X[perm], atol=tol)
        assert value(pol, State(g)).item() == pytest.approx(value(pol, State(h)).item(), abs=tol)


@pytest.mark.parametrize("how", ["sum", "mean", "max", "concat"])
def test_aggregator_of_single_input_is_identity(how, rng):
    x = T.Tensor(rng.normal(size=(3, 4)))
    np.testing.assert_array_equal(_aggregate([x], how).data, x.data)


def test_distribution_supports_n2():
    pol = make_policy()
    d = action_distributions(pol, State(parse("CO")))
    assert len(d.first) == 2 and np.count_nonzero(d.first) == 2
    p2 = d.second(0)
    assert len(p2) == 11 and np.count_nonzero(p2) == 10 and p2[0] == 0.0


def _zero_heads(pol):
    for name, t in pol.params.items():
        if name.split(".")[0] in ("m_f", "m_s", "m_e", "m_t") and name.endswith((".w2", ".b2")):
            t.data = np.zeros_like(t.data)


def test_zero_heads_are_uniform():
    pol = make_policy()
    _zero_heads(pol)
    d = action_distributions(pol, State(parse("CO")))
    np.testing.assert_allclose(d.first, 0.5, atol=1e-15)
    np.testing.assert_allclose(d.stop, 0.5, atol=1e-15)
    np.testing.assert_allclose(d.second(1)[[0] + list(range(2, 11))], 0.1, atol=1e-15)
    np.testing.assert_allclose(d.edge(0, 5), 1 / 3, atol=1e-15)
    lp = log_prob(pol, State(parse("CO")), ActionVec(0, 4, 2, False)).item()
    assert lp == pytest.approx(math.log(1 / 2) + math.log(1 / 10) + math.log(1 / 3) + math.log(1 / 2), abs=1e-12)


def test_distributions_normalize_and_mask(rng):
    pol = make_policy()
    randomize(pol.params, rng)
    for _ in range(10):
        s = State(random_graph(rng, 1, 8))
        d = action_distributions(pol, s)
        assert abs(d.first.sum() - 1) < 1e-9 and abs(d.stop.sum() - 1) < 1e-9
        first = int(rng.integers(s.n))
        p2 = d.second(first)
        assert abs(p2.sum() - 1) < 1e-9 and p2[first] == 0.0
        assert abs(d.edge(first, int(rng.integers(s.n + 9))).sum() - 1) < 1e-9


def _stub(first, stop, second, edge):
    return SimpleNamespace(first=np.asarray(first), stop=np.asarray(stop), second=second, edge=edge)


def test_sample_action_deterministic():
    d = _stub([0, 1], [1, 0], lambda f: np.eye(4)[2], lambda f, s: np.eye(3)[1])
    a, lp = sample_action(d, np.random.default_rng(0))
    assert a == ActionVec(1, 2, 1, False) and lp == 0.0
    d = _stub([1.0], [0.0, 1.0], None, None)
    a, lp = sample_action(d, np.random.default_rng(0))
    assert a.stop and lp == 0.0


def test_sample_action_monte_carlo():
    stop = np.array([0.7, 0.3])
    first = np.array([0.25, 0.75])
    sec = {0: np.array([0.0, 0.5, 0.2, 0.3]), 1: np.array([0.6, 0.0, 0.1, 0.3])}
    edge = np.array([0.2, 0.3, 0.5])
    d = _stub(first, stop, lambda f: sec[f], lambda f, s: edge)
    rng = np.random.default_rng(42)
    N = 100_000
    counts = {}
    for _ in range(N):
        a, _ = sample_action(d, rng)
        key = "stop" if a.stop else (a.first, a.second, a.edge_type)
        counts[key] = counts.get(key, 0) + 1
    probs = {"stop": stop[1]}
    for f in (0, 1):
        for s in range(4):
            for e in range(3):
                probs[(f, s, e)] = stop[0] * first[f] * sec[f][s] * edge[e]
    for key, p in probs.items():
        c = counts.get(key, 0)
        sigma = math.sqrt(N * p * (1 - p))
        assert abs(c - N * p) <= 3 * sigma + 1e-12, key


def test_sampled_log_prob_matches_recomputed(rng):
    pol = make_policy()
    randomize(pol.params, rng)
    states = [State(random_graph(rng, 1, 8)) for _ in range(20)]
    actions, logp, values = pol.sample(states, rng)
    for s, a, lp, v in zip(states, actions, logp, values):
        assert log_prob(pol, s, a).item() == pytest.approx(lp, abs=1e-10)
        assert value(pol, s).item() == pytest.approx(v, abs=1e-12)


def test_log_prob_rejects_first_outside_graph():
    pol = make_policy()
    with pytest.raises(ContractError):
        log_prob(pol, State(parse("CC")), ActionVec(3, 0, 0, False))


def test_log_prob_gradient_check(rng):
    pol = make_policy(embed_dim=4)
    randomize(pol.params, rng, 0.3)
    s = State(random_graph(rng, 4, 6))
    a = ActionVec(1, s.n + 2, 0, False)
    err = T.check_gradients(lambda: log_prob(pol, s, a), pol.params)
    assert max(err.values()) < 1e-4


def test_value_zero_init_and_gradient(rng):
    pol = make_policy(embed_dim=4)
    assert value(pol, State(parse("CCO"))).item() == 0.0
    randomize(pol.params, rng, 0.3)
    s = State(random_graph(rng, 4, 6))
    assert max(T.check_gradients(lambda: value(pol, s), pol.params).values()) < 1e-4


def test_stop_log_prob_factorizes(rng):
    pol = make_policy()
    randomize(pol.params, rng)
    grads = T.backward(log_prob(pol, State(parse("CCN")), STOP), pol.params)
    for name, g in grads.items():
        if name.startswith(("m_f.", "m_s.", "m_e.")):
            assert not g.any(), name
    assert any(grads[n].any() for n in grads if n.startswith("m_t."))


def test_batched_equals_per_graph(rng):
    pol = make_policy()
    randomize(pol.params, rng)
    graphs = [random_graph(rng, 1, 8) for _ in range(6)]
    batch = pol.batch(graphs)
    X = pol.embed(batch).data
    acts = [ActionVec(0, g.n + 1, 0, False) for g in graphs]
    lp, ent, v = pol.evaluate(batch, ActionArrays.from_actions(acts))
    for b, g in enumerate(graphs):
        single = pol.batch([g])
        Xs = pol.embed(single).data
        rows = g.n + 9
        np.testing.assert_allclose(X[b, :rows], Xs[0, :rows], atol=1e-8)
        lp1, ent1, v1 = pol.evaluate(single, ActionArrays.from_actions([acts[b]]))
        assert abs(lp.data[b] - lp1.data[0]) < 1e-8 and abs(v.data[b] - v1.data[0]) < 1e-8
        assert abs(ent.data[b] - ent1.data[0]) < 1e-8


def test_discriminator_score_and_reward(rng):
    disc = Discriminator.initialize(GcpnConfig(**SMALL), rng)
    for smi in ("C", "CCO", "C1CCCCC1"):
        assert disc.score(parse(smi)) == 0.5
    randomize(disc.params, rng)
    g = random_graph(rng)
    h = permute(g, rng.permutation(g.n))
    assert disc.score(g) == pytest.approx(disc.score(h), abs=1e-6)
    assert 0 < disc.score(g) < 1
    assert raw_adversarial(0.5) == pytest.approx(0.6931471805599453)
    assert raw_adversarial(1.0) == 5.0 and raw_adversarial(1 - 1e-300) == 5.0
    xs = np.linspace(0, 0.999, 50)
    vals = [raw_adversarial(x) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert adversarial_reward(0.0) == -1.0 and adversarial_reward(1.0) == 1.0


def test_checkpoint_round_trip_and_integrity(tmp_path, rng):
    pol = make_policy()
    randomize(pol.params, rng)
    arrays = {**pol.state_arrays(), "meta.scalar": np.array(3.0), "meta.empty": np.zeros((0, 2))}
    blob = encode_arrays(arrays)
    assert blob[:8] == b"MGRL0001"
    back = decode_arrays(blob)
    assert set(back) == set(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k]) and back[k].shape == arrays[k].shape
    path = save_checkpoint(tmp_path / "c.bin", arrays)
    assert path.read_bytes() == blob and set(load_checkpoint(path)) == set(arrays)
    with pytest.raises(IntegrityError):
        decode_arrays(b"XXXX0001" + blob[8:])
    corrupt = bytearray(blob)
    corrupt[40] ^= 0xFF
    with pytest.raises(IntegrityError):
        decode_arrays(bytes(corrupt))
    with pytest.raises(IntegrityError):
        decode_arrays(blob[:-3])
    pol2 = make_policy(seed=9)
    pol2.load_arrays(back)
    s = State(parse("CCO"))
    assert log_prob(pol2, s, STOP).item() == log_prob(pol, s, STOP).item()


def test_encode_pad_rows_stay_zero(rng):
    pol = make_policy()
    randomize(pol.params, rng)
    batch = build_batch([parse("CC")], 15)
    X = encode(batch, pol.params, pol.config, "", "eval", pol.bn_states).data
    assert not X[0, 11:].any()
