"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import nx_isomorphic, random_graph
from gcpn import tensor as T
from gcpn.chemprops import molecular_weight, property_fn
from gcpn.cli import main as cli_main
from gcpn.env import EnvConfig, MoleculeEnv, State
from gcpn.molgraph import is_connected, is_isomorphic, is_valid
from gcpn.nets import Discriminator, GcpnConfig, GcpnPolicy, log_prob, value
from gcpn.smiles import load_corpus, parse, write
from gcpn.tensor import AdamState
from gcpn.trainer import (PpoConfig, Trainer, clipped_surrogate, collect_rollouts, discriminator_loss,
                          expert_pretrain, hill_climb, make_batch, ppo_loss, train_discriminator,
                          trajectory_nll, uniform_trajectory_nll)
from gcpn.env import ActionVec
from gcpn.utils.rng import stream

DATA = Path(__file__).parent / "data"


@pytest.fixture
def verdict(capsys, request):
    """Call once with (ok, detail); prints the PASS/FAIL line, then asserts."""

    def emit(ok, detail=""):
        line = f"ACCEPTANCE {request.node.name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def _randomize(params, rng, scale=0.5):
    for t in params.values():
        t.data = t.data + rng.normal(scale=scale, size=t.shape)


def _all_valid_and_reparse(graphs, cap):
    for g in graphs:
        if not (is_valid(g, cap) and is_connected(g)):
            return False
        again = parse(write(g))
        if not nx_isomorphic(g, again):
            return False
    return True


# 1 -------------------------------------------------------------------------------------------------
def test_01_validity_invariant(verdict):
    t0 = time.time()
    cap = 38
    env_cfg = EnvConfig(atom_cap=cap, prop=property_fn("plogp"))
    tr = Trainer(env_cfg, PpoConfig(iterations=3, episodes=16, seed=0), GcpnConfig(atom_cap=cap))
    untrained = collect_rollouts(MoleculeEnv(env_cfg), tr.policy, 1000, stream(1, "env"))
    tr.train()
    trained = collect_rollouts(MoleculeEnv(env_cfg), tr.policy, 1000, stream(2, "env"))
    ok_u = _all_valid_and_reparse([t.final_graph for t in untrained], cap)
    ok_t = _all_valid_and_reparse([t.final_graph for t in trained], cap)
    elapsed = time.time() - t0
    verdict(ok_u and ok_t and elapsed < 60,
            f"untrained={ok_u} trained={ok_t} n=2x1000 runtime={elapsed:.1f}s")


# 2 -------------------------------------------------------------------------------------------------
def test_02_gradient_correctness(verdict):
    t0 = time.time()
    rng = np.random.default_rng(2)
    cfg = GcpnConfig(layers=3, embed_dim=4, atom_cap=8)
    worst = {"log_prob": 0.0, "value": 0.0, "disc_loss": 0.0}
    for _ in range(5):
        pol = GcpnPolicy.initialize(cfg, rng)
        _randomize(pol.params, rng, 0.3)
        disc = Discriminator.initialize(cfg, rng)
        _randomize(disc.params, rng, 0.3)
        g = random_graph(rng, 4, 8)
        s = State(g)
        a = ActionVec(int(rng.integers(g.n)), g.n + int(rng.integers(9)), int(rng.integers(2)), False)
        fake = [random_graph(rng, 4, 8)]
        checks = {
            "log_prob": (lambda: log_prob(pol, s, a), pol.params),
            "value": (lambda: value(pol, s), pol.params),
            "disc_loss": (lambda: discriminator_loss(disc, [g], fake, "train"), disc.params),
        }
        for name, (fn, params) in checks.items():
            bn = [(st.running_mean.copy(), st.running_var.copy()) for st in disc.bn_states]
            err = max(T.check_gradients(fn, params, h=1e-5).values())
            for st, (m, v) in zip(disc.bn_states, bn):
                st.running_mean, st.running_var = m, v
            worst[name] = max(worst[name], err)
    elapsed = time.time() - t0
    ok = max(worst.values()) < 1e-4 and elapsed < 60
    verdict(ok, " ".join(f"{k}={v:.2e}" for k, v in worst.items()) + f" runtime={elapsed:.1f}s")


# 3 -------------------------------------------------------------------------------------------------
def test_03_distribution_soundness(verdict):
    rng = np.random.default_rng(3)
    pol = GcpnPolicy.initialize(GcpnConfig(atom_cap=16), rng)
    _randomize(pol.params, rng)
    states = [State(random_graph(rng, 1, 12)) for _ in range(100)]
    batch = pol.batch([s.graph for s in states])
    X = pol.embed(batch)
    B = batch.size
    rows = np.arange(B)
    first = np.array([int(rng.integers(s.n)) for s in states])
    second = np.array([s.n + int(rng.integers(9)) for s in states])
    dists = {
        "first": (T.softmax_rows(pol.first_logits(X), batch.graph_mask).data, batch.graph_mask),
        "second": (T.softmax_rows(pol.second_logits(X, first), pol.second_mask(batch, first)).data,
                   pol.second_mask(batch, first)),
        "edge": (T.softmax_rows(pol.edge_logits(X, first, second)).data, np.ones((B, 3), bool)),
        "stop": (T.softmax_rows(pol.stop_logits(X, batch)).data, np.ones((B, 2), bool)),
    }
    sums = max(float(np.max(np.abs(p.sum(axis=1) - 1))) for p, _ in dists.values())
    masked_zero = all(np.all(p[~m] == 0.0) for p, m in dists.values())
    p_first = dists["first"][0]
    scaffold_free = all(not p_first[b, batch.n[b]:].any() for b in range(B))
    second_no_self = bool(np.all(dists["second"][0][rows, first] == 0.0))
    verdict(sums < 1e-9 and masked_zero and scaffold_free and second_no_self,
            f"max|sum-1|={sums:.1e} masked_zero={masked_zero} first_scaffold_free={scaffold_free}")


# 4 -------------------------------------------------------------------------------------------------
def test_04_ppo_clip_suite(verdict):
    cases = [clipped_surrogate(1.0, 0.7, 0.2) == 0.7, clipped_surrogate(1.5, 1.0, 0.2) == 1.2,
             clipped_surrogate(0.5, -1.0, 0.2) == -0.8]
    # the training-path loss applies the same clip
    pol = GcpnPolicy.initialize(GcpnConfig(layers=1, embed_dim=4, atom_cap=6), np.random.default_rng(4))
    cfg = PpoConfig(clip=0.2, entropy_coef=0.0, value_coef=0.0)
    trajs = collect_rollouts(MoleculeEnv(EnvConfig(atom_cap=6)), pol, 6, np.random.default_rng(4))
    batch = make_batch(pol, trajs, cfg)
    unit = abs(ppo_loss(pol, batch, cfg)[1]["policy_loss"] + batch.advantages.mean()) < 1e-12
    shift = np.random.default_rng(5).choice([math.log(1.5), math.log(0.5)], size=len(batch))
    batch.log_prob_old = batch.log_prob_old - shift
    expected = -clipped_surrogate(np.exp(shift), batch.advantages, 0.2).mean()
    shifted = abs(ppo_loss(pol, batch, cfg)[1]["policy_loss"] - expected) < 1e-10
    rng = np.random.default_rng(44)
    r, adv = rng.uniform(0.0, 3.0, 10_000), rng.normal(size=10_000)
    bound = bool(np.all(clipped_surrogate(r, adv, 0.2) <= r * adv))
    verdict(all(cases) and unit and shifted and bound,
            f"cases={cases} unit_ratio={unit} loss_path={shifted} lower_bound_1e4={bound}")


# 5 -------------------------------------------------------------------------------------------------
def test_05_expert_learning_signal(verdict):
    t0 = time.time()
    graphs = load_corpus(DATA / "toy_corpus.smi", atom_cap=12).graphs
    order = np.random.default_rng(0).permutation(len(graphs))
    train = [graphs[i] for i in order[:50]]
    held = [graphs[i] for i in order[50:]]
    pol = GcpnPolicy.initialize(GcpnConfig(atom_cap=12), stream(0, "init"))
    uniform = sum(uniform_trajectory_nll(g) for g in held)
    before = sum(trajectory_nll(pol, g) for g in held)
    expert_pretrain(train, pol, 200, stream(0, "expert"), lr=2.5e-4, batch_size=32)
    after = sum(trajectory_nll(pol, g) for g in held)
    elapsed = time.time() - t0
    verdict(after < uniform and elapsed < 300,
            f"held-out NLL uniform={uniform:.2f} init={before:.2f} after_200={after:.2f} runtime={elapsed:.1f}s")


# 6 -------------------------------------------------------------------------------------------------
def test_06_rl_improvement_trend(verdict):
    t0 = time.time()
    cap = 12
    env_cfg = EnvConfig(atom_cap=cap, prop=property_fn("mw"), anchors=(16.043, 1100.0), filter_reward=False)
    net = GcpnConfig(atom_cap=cap)
    tr = Trainer(env_cfg, PpoConfig(iterations=300, episodes=16, seed=0), net)
    random_policy = tr.policy.snapshot()
    report = tr.train()
    mp = report.series("mean_property")
    q = len(mp) // 4
    first, last = float(mp[:q].mean()), float(mp[-q:].mean())
    rand = collect_rollouts(MoleculeEnv(env_cfg), random_policy, 500, stream(6, "env"))
    rand_mean = float(np.mean([molecular_weight(t.final_graph) for t in rand]))
    elapsed = time.time() - t0
    verdict(last > first and last > rand_mean and elapsed < 900,
            f"first25%={first:.2f} last25%={last:.2f} random500={rand_mean:.2f} runtime={elapsed:.0f}s")


# 7 -------------------------------------------------------------------------------------------------
def test_07_targeting_trend(verdict):
    t0 = time.time()
    cap = 12
    prop = property_fn("mw", (150.0, 200.0))
    env_cfg = EnvConfig(atom_cap=cap, prop=prop, filter_reward=False)
    tr = Trainer(env_cfg, PpoConfig(iterations=150, episodes=16, seed=0), GcpnConfig(atom_cap=cap))
    random_policy = tr.policy.snapshot()
    tr.train()
    env = MoleculeEnv(env_cfg)
    trained = collect_rollouts(env, tr.policy, 500, stream(7, "env"))
    rand = collect_rollouts(env, random_policy, 500, stream(7, "env"))
    s_trained = float(np.mean([prop.success(t.final_graph) for t in trained]))
    s_random = float(np.mean([prop.success(t.final_graph) for t in rand]))
    elapsed = time.time() - t0
    verdict(s_trained > s_random and s_trained >= 2 * s_random and elapsed < 900,
            f"success trained={s_trained:.3f} random={s_random:.3f} over 500 episodes runtime={elapsed:.0f}s")


# 8 -------------------------------------------------------------------------------------------------
SUBSTITUENTS = ["", "C", "O", "N", "F", "Cl", "CC", "CO", "CN", "C(=O)O", "OC", "S", "Br", "C#N", "CCC", "I"]


def test_08_discriminator_separability(verdict):
    rings = [parse(f"C1CCCCC1{s}") for s in SUBSTITUENTS]
    chains = [parse(f"CCCCCC{s}") for s in SUBSTITUENTS]
    disc = Discriminator.initialize(GcpnConfig(atom_cap=12), stream(8, "discriminator"))
    init_loss = discriminator_loss(disc, rings, chains, "eval").item()
    opt = AdamState(lr=1e-3)
    acc, steps = 0.0, 0
    for steps in range(1, 201):
        _, acc = train_discriminator(rings, chains, disc, opt)
        if acc > 0.9:
            break
    ok = acc > 0.9 and abs(init_loss - math.log(2)) < 1e-12
    verdict(ok, f"init_loss={init_loss:.12f} (ln2={math.log(2):.12f}) balanced_acc={acc:.3f} after {steps} steps")


# 9 -------------------------------------------------------------------------------------------------
EDGE_CASES = ["C1CCCCC1", "C1CC2CCC1C2", "CC(C)(C)C", "OC(=O)CC#N", "SCC(N)O", "PC(F)(Cl)Br", "IC=C",
              "C#CC=C", "C12CC1C2", "N1CCC(CC1)C(=O)O", "C1CCC2CCCCC2C1", "C1=CC=CC=C1", "CC(=C(C)C)C#N",
              "C12C3C1C23", "OC1C(O)C(O)C1O"]


def test_09_round_trip(verdict):
    pol = GcpnPolicy.initialize(GcpnConfig(atom_cap=16), stream(9, "init"))
    pol.params["m_t.b2"].data = np.array([5.0, -5.0])  # discourage early stops
    trajs = collect_rollouts(MoleculeEnv(EnvConfig(atom_cap=16)), pol, 200, stream(9, "env"))
    generated = [t.final_graph for t in trajs]
    edge = [parse(s) for s in EDGE_CASES]
    orders = {o for g in edge for _, _, o in g.edges()}
    edge_atoms = {g.symbol(u) for g in edge for u in range(g.n)}
    failures = [g for g in generated + edge
                if not (is_isomorphic(parse(write(g)), g) and nx_isomorphic(parse(write(g)), g))]
    ok = not failures and orders == {1, 2, 3} and len(edge_atoms) == 9
    verdict(ok, f"generated={len(generated)} (mean atoms {np.mean([g.n for g in generated]):.1f}, max {max(g.n for g in generated)}) edge_cases={len(edge)} "
                f"failures={len(failures)} bond_orders={sorted(orders)} edge_atoms={len(edge_atoms)}")


# 10 ------------------------------------------------------------------------------------------------
def test_10_hill_climb_contract(verdict):
    prop = property_fn("mw")
    env = MoleculeEnv(EnvConfig(atom_cap=8, prop=prop, filter_reward=False))
    start = env.reset()
    successors = {}
    for a in env.enumerate_legal(start):
        if not a.stop:
            g = env.apply(start, a)
            successors[g] = molecular_weight(g)
    top5 = sorted(successors, key=lambda g: -successors[g])[:5]
    results = hill_climb(env, prop.score, stream(10, "policy"), restarts=20)
    monotone = all(all(b > a for a, b in zip(r.scores, r.scores[1:])) for r in results)
    first_ok = all(any(r.path[1] == g for g in top5) for r in results)
    hit = {write(r.path[1]) for r in results}
    verdict(monotone and first_ok, f"monotone={monotone} first_move_in_top5={first_ok} "
                                   f"top5={[write(g) for g in top5]} first_moves_seen={sorted(hit)}")


# 11 ------------------------------------------------------------------------------------------------
def _outputs(d: Path):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "config.txt"}


def test_11_determinism(verdict, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "corpus.smi").write_text((DATA / "toy_corpus.smi").read_text())
    (tmp_path / "base.cfg").write_text("atom_cap = 10\nlayers = 2\nembed_dim = 8\niterations = 3\n"
                                       "episodes = 4\nminibatch = 16\nepochs = 2\ncorpus = corpus.smi\n"
                                       "pretrain_epochs = 2\nseed = 17\n")
    (tmp_path / "refs.smi").write_text("CCO\nC1CCCCC1\n")
    first_runs = {
        "pretrain": ["pretrain", "--config", "base.cfg"],
        "train": ["train", "--config", "base.cfg", "--property", "mw", "--target", "150:200"],
        "train-adv": ["train", "--config", "base.cfg", "--set", "adversarial=true",
                      "--set", "step_adversarial=true"],
        "train-constrained": ["train", "--config", "base.cfg", "--constrained", "refs.smi"],
        "generate": ["generate", "--config", "base.cfg", "--checkpoint", "train/checkpoint.bin",
                     "--count", "30"],
        "evaluate": ["evaluate", "generate/molecules.smi", "--config", "base.cfg", "--constrained", "refs.smi"],
        "hillclimb": ["hillclimb", "--config", "base.cfg", "--property", "logp"],
    }
    results = {}
    for name, argv in first_runs.items():
        codes = [cli_main(argv + ["--out", name])]
        replay = ["evaluate", "generate/molecules.smi"] if name == "evaluate" else [argv[0]]
        codes.append(cli_main(replay + ["--config", f"{name}/config.txt", "--out", f"{name}-replay"]))
        a, b = _outputs(tmp_path / name), _outputs(tmp_path / f"{name}-replay")
        cfg_a = (tmp_path / name / "config.txt").read_text().replace(f"out = {name}\n", "")
        cfg_b = (tmp_path / f"{name}-replay" / "config.txt").read_text().replace(f"out = {name}-replay\n", "")
        results[name] = codes == [0, 0] and a == b and bool(a) and cfg_a == cfg_b
    verdict(all(results.values()), " ".join(f"{k}={'ok' if v else 'DIFF'}" for k, v in results.items()))
