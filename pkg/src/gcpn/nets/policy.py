"""Graph convolutional policy: shared GCN encoder with four action heads
(first node, second node, edge type, stop) and a value head."""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..env import ActionVec, State
from ..errors import ContractError, TrainingDivergenceError
from ..molgraph import MolGraph
from ..tensor import (Tensor, broadcast_to, concat, entropy_rows, init_mlp2, log_softmax, mlp2, mul,
                      reshape, softmax_rows, take)
from .gcn import (GcpnConfig, GraphBatch, build_batch, encode, init_bn_states, init_gcn_params,
                  readout)

HEADS = ("m_f", "m_s", "m_e", "m_t", "value")


@dataclass
class ActionArrays:
    """Column form of a list of actions, for batched log-prob evaluation."""

    first: np.ndarray
    second: np.ndarray
    edge: np.ndarray
    stop: np.ndarray

    @classmethod
    def from_actions(cls, actions: Sequence[ActionVec]) -> "ActionArrays":
        return cls(np.array([a.first for a in actions], dtype=int),
                   np.array([a.second for a in actions], dtype=int),
                   np.array([a.edge_type for a in actions], dtype=int),
                   np.array([a.stop for a in actions], dtype=bool))

    def subset(self, idx) -> "ActionArrays":
        return ActionArrays(self.first[idx], self.second[idx], self.edge[idx], self.stop[idx])


class GcpnPolicy:
    """Parameters, batch-norm moments and forward passes of the policy network."""

    def __init__(self, config: GcpnConfig, params: dict[str, Tensor], bn_states=None):
        self.config = config
        self.params = params
        self.bn_states = bn_states if bn_states is not None else init_bn_states(config)

    @classmethod
    def initialize(cls, config: GcpnConfig, rng: np.random.Generator) -> "GcpnPolicy":
        k, d = config.embed_dim, config.layer_out
        params = init_gcn_params(rng, config, "")
        params.update(init_mlp2(rng, "m_f", d, k, 1))
        params.update(init_mlp2(rng, "m_s", 2 * d, k, 1))
        params.update(init_mlp2(rng, "m_e", 2 * d, k, config.edge_types))
        params.update(init_mlp2(rng, "m_t", d, k, 2, zero_output=True))
        params.update(init_mlp2(rng, "value", d, k, 1, zero_output=True))
        return cls(config, params)

    def snapshot(self) -> "GcpnPolicy":
        """Frozen copy: detached parameters (no tape), copied moments."""
        return GcpnPolicy(self.config, {k: Tensor(v.data.copy(), name=k) for k, v in self.params.items()},
                          copy.deepcopy(self.bn_states))

    def batch(self, graphs: Sequence[MolGraph]) -> GraphBatch:
        return build_batch(graphs, self.config.pad_size, with_scaffolds=True,
                           edge_types=self.config.edge_types)

    def embed(self, batch: GraphBatch, mode: str = "eval") -> Tensor:
        return encode(batch, self.params, self.config, "", mode, self.bn_states)

    # ------------------------------------------------------------ heads

    def first_logits(self, X: Tensor) -> Tensor:
        B, P, _ = X.shape
        return reshape(mlp2(X, self.params, "m_f"), (B, P))

    def second_logits(self, X: Tensor, first: np.ndarray) -> Tensor:
        B, P, D = X.shape
        xf = take(X, (np.arange(B), first))
        pair = concat([broadcast_to(reshape(xf, (B, 1, D)), (B, P, D)), X], axis=-1)
        return reshape(mlp2(pair, self.params, "m_s"), (B, P))

    def edge_logits(self, X: Tensor, first: np.ndarray, second: np.ndarray) -> Tensor:
        B = X.shape[0]
        rows = np.arange(B)
        return mlp2(concat([take(X, (rows, first)), take(X, (rows, second))], axis=-1), self.params, "m_e")

    def graph_embedding(self, X: Tensor, batch: GraphBatch) -> Tensor:
        return readout(X, batch.graph_mask, self.config.readout)

    def stop_logits(self, X: Tensor, batch: GraphBatch) -> Tensor:
        return mlp2(self.graph_embedding(X, batch), self.params, "m_t")

    def values(self, X: Tensor, batch: GraphBatch) -> Tensor:
        return reshape(mlp2(self.graph_embedding(X, batch), self.params, "value"), (X.shape[0],))

    @staticmethod
    def second_mask(batch: GraphBatch, first: np.ndarray) -> np.ndarray:
        mask = batch.ext_mask.copy()
        mask[np.arange(batch.size), first] = False
        return mask

    # ------------------------------------------------------------ batched training path

    def evaluate(self, batch: GraphBatch, actions: ActionArrays, mode: str = "eval"):
        """(log_prob, entropy, value) tensors of shape (B,) for the given actions."""
        B = batch.size
        rows = np.arange(B)
        if np.any(~actions.stop & ((actions.first >= batch.n) | (actions.first < 0))):
            raise ContractError("first node must index the current graph")
        # stop actions need in-support placeholders for the unused link heads
        first = np.where(actions.stop, 0, actions.first)
        second = np.where(actions.stop, batch.n, actions.second)
        if np.any(second == first) or np.any(~batch.ext_mask[rows, second]):
            raise ContractError("second node outside its support")
        cont = (~actions.stop).astype(np.float64)

        X = self.embed(batch, mode)
        lf = log_softmax(self.first_logits(X), batch.graph_mask)
        smask = self.second_mask(batch, first)
        s_logits = self.second_logits(X, first)
        ls = log_softmax(s_logits, smask)
        e_logits = self.edge_logits(X, first, second)
        le = log_softmax(e_logits)
        t_logits = self.stop_logits(X, batch)
        lt = log_softmax(t_logits)

        link = take(lf, (rows, first)) + take(ls, (rows, second)) + take(le, (rows, actions.edge))
        logp = take(lt, (rows, actions.stop.astype(int))) + mul(link, cont)
        ent = (entropy_rows(t_logits)
               + mul(entropy_rows(self.first_logits(X), batch.graph_mask)
                     + entropy_rows(s_logits, smask) + entropy_rows(e_logits), cont))
        return logp, ent, self.values(X, batch)

    # ------------------------------------------------------------ rollout path

    def sample(self, states: Sequence[State], rng: np.random.Generator):
        """Sample one action per state; returns (actions, log_probs, values) as arrays.

        Per state the draw order is stop, then first, second and edge type.
        """
        batch = self.batch([s.graph for s in states])
        B = batch.size
        rows = np.arange(B)
        X = self.embed(batch, "eval")
        p_stop = softmax_rows(self.stop_logits(X, batch)).data
        p_first = softmax_rows(self.first_logits(X), batch.graph_mask).data
        u = rng.random((B, 4))
        stop = u[:, 0] < p_stop[:, 1]
        first = _inverse_cdf(p_first, u[:, 1])
        p_second = softmax_rows(self.second_logits(X, first), self.second_mask(batch, first)).data
        second = _inverse_cdf(p_second, u[:, 2])
        p_edge = softmax_rows(self.edge_logits(X, first, second)).data
        if not all(np.isfinite(p).all() for p in (p_stop, p_first, p_second, p_edge)):
            raise TrainingDivergenceError("non-finite action probabilities while sampling")
        edge = _inverse_cdf(p_edge, u[:, 3])
        with np.errstate(divide="ignore"):
            logp = np.where(stop, np.log(p_stop[:, 1]),
                            np.log(p_stop[:, 0]) + np.log(p_first[rows, first])
                            + np.log(p_second[rows, second]) + np.log(p_edge[rows, edge]))
        actions = [ActionVec(0, 0, 0, True) if stop[b] else
                   ActionVec(int(first[b]), int(second[b]), int(edge[b]), False) for b in range(B)]
        return actions, logp, self.values(X, batch).data.copy()

    def nll(self, states: Sequence[State], actions: Sequence[ActionVec]) -> float:
        """Summed negative log-likelihood of actions (eval mode, no tape)."""
        frozen = self.snapshot()
        logp, _, _ = frozen.evaluate(frozen.batch([s.graph for s in states]),
                                     ActionArrays.from_actions(actions), "eval")
        return float(-logp.data.sum())

    # ------------------------------------------------------------ persistence

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {name: t.data for name, t in self.params.items()}
        for layer, st in enumerate(self.bn_states):
            arrays[f"bn{layer}.running_mean"] = st.running_mean
            arrays[f"bn{layer}.running_var"] = st.running_var
        return arrays

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.params.items():
            if arrays[name].shape != t.shape:
                raise ContractError(f"checkpoint shape mismatch for {name}")
            t.data = np.array(arrays[name], dtype=np.float64)
        for layer, st in enumerate(self.bn_states):
            st.running_mean = np.array(arrays[f"bn{layer}.running_mean"])
            st.running_var = np.array(arrays[f"bn{layer}.running_var"])


def _inverse_cdf(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=1)
    idx = np.minimum((cdf < (u * cdf[:, -1])[:, None]).sum(axis=1), p.shape[1] - 1)
    # round-off can land on a zero-probability slot; snap to the next supported one
    for b in np.nonzero(p[np.arange(len(idx)), idx] == 0)[0]:
        support = np.nonzero(p[b])[0]
        idx[b] = support[min(np.searchsorted(support, idx[b]), len(support) - 1)]
    return idx


# ---------------------------------------------------------------- single-state API

@dataclass
class ActionDistributions:
    """Head distributions for one state; second and edge are conditional."""

    policy: GcpnPolicy
    batch: GraphBatch
    X: Tensor
    first: np.ndarray
    stop: np.ndarray

    @property
    def n(self) -> int:
        return int(self.batch.n[0])

    def second(self, first: int) -> np.ndarray:
        f = np.array([first])
        p = softmax_rows(self.policy.second_logits(self.X, f), self.policy.second_mask(self.batch, f))
        return p.data[0, : self.n + self.batch.c]

    def edge(self, first: int, second: int) -> np.ndarray:
        return softmax_rows(self.policy.edge_logits(self.X, np.array([first]), np.array([second]))).data[0]


def node_embeddings(g_ext: MolGraph, policy: GcpnPolicy, mode: str = "eval") -> Tensor:
    """X for an already-extended graph, shape ((n + c) × D)."""
    batch = build_batch([g_ext], max(g_ext.n, 1), with_scaffolds=False, edge_types=policy.config.edge_types)
    X = encode(batch, policy.params, policy.config, "", mode, policy.bn_states)
    return take(X, 0)


def action_distributions(policy: GcpnPolicy, s: State) -> ActionDistributions:
    if s.n == 0:
        raise ContractError("action distributions need a non-empty graph")
    batch = policy.batch([s.graph])
    X = policy.embed(batch, "eval")
    n = s.n
    first = softmax_rows(policy.first_logits(X), batch.graph_mask).data[0, :n]
    stop = softmax_rows(policy.stop_logits(X, batch)).data[0]
    return ActionDistributions(policy, batch, X, first, stop)


def sample_action(dists: ActionDistributions, rng: np.random.Generator) -> tuple[ActionVec, float]:
    if rng.random() < dists.stop[1]:
        return ActionVec(stop=True), float(np.log(dists.stop[1]))
    first = int(rng.choice(len(dists.first), p=dists.first))
    p2 = dists.second(first)
    second = int(rng.choice(len(p2), p=p2))
    pe = dists.edge(first, second)
    edge = int(rng.choice(len(pe), p=pe))
    logp = np.log(dists.stop[0]) + np.log(dists.first[first]) + np.log(p2[second]) + np.log(pe[edge])
    return ActionVec(first, second, edge, False), float(logp)


def log_prob(policy: GcpnPolicy, s: State, a: ActionVec, mode: str = "eval") -> Tensor:
    logp, _, _ = policy.evaluate(policy.batch([s.graph]), ActionArrays.from_actions([a]), mode)
    return take(logp, 0)


def value(policy: GcpnPolicy, s: State, mode: str = "eval") -> Tensor:
    if s.done:
        raise ContractError("value of a terminal state")
    batch = policy.batch([s.graph])
    return take(policy.values(policy.embed(batch, mode), batch), 0)
