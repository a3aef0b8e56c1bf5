"""Estimator-style wrappers (fit / sample / transform, get_params)."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .chemprops import property_fn
from .env import EnvConfig, MoleculeEnv, anchors_from_corpus
from .molgraph import fingerprint
from .nets import GcpnConfig, GcpnPolicy
from .smiles import write
from .tensor import AdamState
from .trainer import PpoConfig, Trainer, collect_rollouts, expert_pretrain, hill_climb
from .utils.rng import stream
from .utils.validation import check_molecules


class GCPNGenerator(BaseEstimator):
    """Graph policy trained by expert imitation then PPO.

    ``fit(X)`` takes an optional corpus (SMILES strings or MolGraph); it is used
    for imitation, reward anchors and, if ``adversarial``, the discriminator.
    """

    def __init__(self, property="plogp", target=None, atom_cap=38, iterations=100, episodes=16,
                 pretrain_steps=0, adversarial=False, filter_reward=True, layers=3, embed_dim=64,
                 aggregation="sum", batch_norm=True, lr=1e-3, entropy_coef=0.01, seed=0):
        self.property = property
        self.target = target
        self.atom_cap = atom_cap
        self.iterations = iterations
        self.episodes = episodes
        self.pretrain_steps = pretrain_steps
        self.adversarial = adversarial
        self.filter_reward = filter_reward
        self.layers = layers
        self.embed_dim = embed_dim
        self.aggregation = aggregation
        self.batch_norm = batch_norm
        self.lr = lr
        self.entropy_coef = entropy_coef
        self.seed = seed

    def _property(self):
        return property_fn(self.property, tuple(self.target) if self.target is not None else None)

    def fit(self, X=None, y=None):
        corpus = check_molecules(X, self.atom_cap)
        if self.adversarial and not corpus:
            raise ValueError("adversarial training needs a corpus")
        prop = self._property()
        net = GcpnConfig(layers=self.layers, embed_dim=self.embed_dim, aggregation=self.aggregation,
                         batch_norm=self.batch_norm, atom_cap=self.atom_cap)
        env_config = EnvConfig(atom_cap=self.atom_cap, prop=prop,
                               anchors=anchors_from_corpus(prop, corpus) if corpus else None,
                               filter_reward=self.filter_reward, final_adversarial=self.adversarial)
        ppo = PpoConfig(iterations=self.iterations, episodes=self.episodes, lr=self.lr,
                        entropy_coef=self.entropy_coef, seed=self.seed)
        policy = GcpnPolicy.initialize(net, stream(self.seed, "init"))
        if self.pretrain_steps and corpus:
            expert_pretrain(corpus, policy, self.pretrain_steps, stream(self.seed, "expert"),
                            lr=ppo.expert_lr, atom_cap=self.atom_cap, opt=AdamState(lr=ppo.expert_lr))
        trainer = Trainer(env_config, ppo, net, corpus, policy=policy, expert=bool(corpus))
        self.report_ = trainer.train()
        self.policy_ = trainer.policy
        self.discriminator_ = trainer.disc
        self.env_config_ = env_config
        return self

    def sample(self, n_molecules, seed=None):
        """Draw ``n_molecules`` finished graphs from the fitted policy."""
        check_is_fitted(self, "policy_")
        env = MoleculeEnv(self.env_config_)
        rng = stream(self.seed if seed is None else seed, "env")
        return [t.final_graph for t in collect_rollouts(env, self.policy_, n_molecules, rng)]

    def predict(self, n_molecules, seed=None):
        """SMILES strings for ``n_molecules`` samples."""
        return [write(g) for g in self.sample(n_molecules, seed)]

    def score(self, X=None, y=None):
        """Mean property score of ``X`` (or of 100 fresh samples)."""
        check_is_fitted(self, "policy_")
        graphs = check_molecules(X) if X is not None else self.sample(100)
        prop = self._property()
        return float(np.mean([prop.score(g) for g in graphs]))


class HillClimbGenerator(BaseEstimator):
    """Greedy-stochastic baseline; ``fit`` runs ``restarts`` climbs."""

    def __init__(self, property="mw", target=None, atom_cap=38, restarts=5, seed=0):
        self.property = property
        self.target = target
        self.atom_cap = atom_cap
        self.restarts = restarts
        self.seed = seed

    def fit(self, X=None, y=None):
        prop = property_fn(self.property, tuple(self.target) if self.target is not None else None)
        env = MoleculeEnv(EnvConfig(atom_cap=self.atom_cap, prop=prop, filter_reward=False))
        self.results_ = hill_climb(env, prop.reward, stream(self.seed, "policy"), self.restarts)
        return self

    def predict(self, X=None):
        check_is_fitted(self, "results_")
        return [write(r.graph) for r in self.results_]


class FingerprintTransformer(TransformerMixin, BaseEstimator):
    """Molecules -> (n, n_bits) 0/1 matrix of circular fingerprints."""

    def __init__(self, n_bits=1024, radius=2):
        self.n_bits = n_bits
        self.radius = radius

    def fit(self, X=None, y=None):
        self.n_features_out_ = self.n_bits
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        graphs = check_molecules(X)
        out = np.zeros((len(graphs), self.n_bits), dtype=np.uint8)
        for i, g in enumerate(graphs):
            out[i] = fingerprint(g, self.n_bits, self.radius).to_array()
        return out
