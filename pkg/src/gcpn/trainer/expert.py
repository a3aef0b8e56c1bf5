"""Expert imitation: supervise the policy with actions that grow a corpus
molecule's connected subgraph back towards the molecule."""
from __future__ import annotations

from collections import deque
from typing import Sequence

import logging
import numpy as np

from ..env import STOP, ActionVec, MoleculeEnv, State
from ..errors import EmptyCorpusError
from ..molgraph import (NUM_ATOM_TYPES, SYMBOL_TO_INDEX, MolGraph, connected_subgraph_sample)
from ..nets import ActionArrays, GcpnPolicy
from ..tensor import AdamState, adam_step, backward, clip_grad_norm, mean

logger = logging.getLogger(__name__)


def _spanning_tree_edges(g: MolGraph) -> set[frozenset]:
    tree, seen, queue = set(), {0}, deque([0])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in seen:
                seen.add(v)
                tree.add(frozenset((u, v)))
                queue.append(v)
    return tree


def expert_state(g: MolGraph, rng: np.random.Generator) -> tuple[MolGraph, list[int]]:
    """Connected subgraph of ``g`` with some ring bonds held back."""
    sub, nodes = connected_subgraph_sample(g, rng)
    tree = _spanning_tree_edges(sub)
    bonds = sub.bonds.copy()
    for u, v, _ in sub.edges():
        if frozenset((u, v)) not in tree and rng.random() < 0.5:
            bonds[u, v] = bonds[v, u] = 0
    return MolGraph(sub.atoms, bonds), nodes


def expert_actions(g: MolGraph, state: MolGraph, nodes: Sequence[int]) -> list[ActionVec]:
    """Legal actions that add an atom or bond of ``g`` missing from ``state``."""
    n = state.n
    where = {orig: i for i, orig in enumerate(nodes)}
    out = []
    for i, orig in enumerate(nodes):
        for q in g.neighbors(orig):
            order = int(g.bonds[orig, q])
            if q not in where:
                out.append(ActionVec(i, n + g.atoms[q], order - 1, False))
            elif not state.bonds[i, where[q]]:
                out.append(ActionVec(i, where[q], order - 1, False))
    return out


def expert_pair(g: MolGraph, rng: np.random.Generator) -> tuple[State, ActionVec]:
    state, nodes = expert_state(g, rng)
    actions = expert_actions(g, state, nodes)
    action = actions[int(rng.integers(len(actions)))] if actions else STOP
    return State(state), action


def expert_loss(policy: GcpnPolicy, pairs: Sequence[tuple[State, ActionVec]], mode: str = "train"):
    batch = policy.batch([s.graph for s, _ in pairs])
    logp, _, _ = policy.evaluate(batch, ActionArrays.from_actions([a for _, a in pairs]), mode)
    return -mean(logp)


def expert_step(policy: GcpnPolicy, corpus: Sequence[MolGraph], opt: AdamState, rng: np.random.Generator,
                batch_size: int = 32, max_grad_norm: float | None = None) -> float:
    """One Adam step on the imitation loss for a minibatch of (state, action) pairs."""
    pairs = [expert_pair(corpus[int(rng.integers(len(corpus)))], rng) for _ in range(batch_size)]
    loss = expert_loss(policy, pairs)
    grads = backward(loss, policy.params)
    if max_grad_norm is not None:
        clip_grad_norm(grads, max_grad_norm)
    adam_step(policy.params, grads, opt)
    return loss.item()


def expert_pretrain(corpus: Sequence[MolGraph], policy: GcpnPolicy, steps: int, rng: np.random.Generator,
                    lr: float = 2.5e-4, batch_size: int = 32, atom_cap: int | None = None,
                    opt: AdamState | None = None) -> list[float]:
    """Run ``steps`` imitation minibatches; returns the loss per step."""
    usable = [g for g in corpus if g.n >= 1 and (atom_cap is None or g.n <= atom_cap)]
    for g in corpus:
        if g not in usable:
            logger.warning("skipping corpus molecule with %d atoms (cap %s)", g.n, atom_cap)
    if not usable:
        raise EmptyCorpusError("no corpus molecule can supply expert pairs")
    opt = opt or AdamState(lr=lr)
    return [expert_step(policy, usable, opt, rng, batch_size) for _ in range(steps)]


# ---------------------------------------------------------------- likelihood of a molecule

def construction_trajectory(g: MolGraph, env: MoleculeEnv | None = None) -> list[tuple[State, ActionVec]]:
    """Deterministic breadth-first build of ``g`` from one atom, ending in stop.

    Starts at the lowest-index carbon (the environment's reset state) when
    there is one; every step is checked against the environment rules.
    """
    from ..env import EnvConfig

    env = env or MoleculeEnv(EnvConfig(atom_cap=max(g.n, 1)))
    carbon = SYMBOL_TO_INDEX["C"]
    root = next((u for u in range(g.n) if g.atoms[u] == carbon), 0)
    state = State(MolGraph((g.atoms[root],)))
    where = {root: 0}
    steps = []
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            order = int(g.bonds[u, w])
            if w not in where:
                action = ActionVec(where[u], state.n + g.atoms[w], order - 1, False)
                where[w] = state.n
                queue.append(w)
            elif not state.graph.bonds[where[u], where[w]]:
                action = ActionVec(where[u], where[w], order - 1, False)
            else:
                continue
            steps.append((state, action))
            if env.legal(state, action) is not None:
                raise ValueError(f"construction step {action} is not legal")
            state = State(env.apply(state, action), state.step + 1)
    steps.append((state, STOP))
    return steps


def trajectory_nll(policy: GcpnPolicy, g: MolGraph) -> float:
    steps = construction_trajectory(g)
    return policy.nll([s for s, _ in steps], [a for _, a in steps])


def uniform_trajectory_nll(g: MolGraph, edge_types: int = 3) -> float:
    """NLL of the construction trajectory under uniform head distributions."""
    total = 0.0
    for state, action in construction_trajectory(g):
        total += np.log(2.0)
        if not action.stop:
            n = state.n
            total += np.log(n) + np.log(n + NUM_ATOM_TYPES - 1) + np.log(edge_types)
    return float(total)
