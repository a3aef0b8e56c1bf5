"""Episode collection against a frozen policy snapshot."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..env import ActionVec, MoleculeEnv, RewardBreakdown, State
from ..errors import ContractError
from ..molgraph import MolGraph
from ..nets import GcpnPolicy


@dataclass(frozen=True)
class Transition:
    state: State
    action: ActionVec
    log_prob_old: float
    value_old: float
    reward: float
    done: bool
    breakdown: RewardBreakdown
    infeasible: bool = False


@dataclass
class Trajectory:
    transitions: list[Transition] = field(default_factory=list)
    start: MolGraph | None = None
    final_state: State | None = None

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def final_graph(self) -> MolGraph:
        return self.final_state.graph

    @property
    def total_reward(self) -> float:
        return float(sum(t.reward for t in self.transitions))

    @property
    def complete(self) -> bool:
        return bool(self.transitions) and self.transitions[-1].done


def collect_rollouts(env: MoleculeEnv | Callable[[], MoleculeEnv], policy: GcpnPolicy, n_episodes: int,
                     rng: np.random.Generator, starts: Sequence[MolGraph] | None = None) -> list[Trajectory]:
    """Run ``n_episodes`` episodes in lock step, one batched forward per step.

    ``starts`` switches on constrained mode: each episode begins from a
    molecule drawn uniformly from the list.
    """
    if n_episodes <= 0:
        return []
    env = env() if callable(env) and not isinstance(env, MoleculeEnv) else env
    snapshot = policy.snapshot()
    trajs = [Trajectory() for _ in range(n_episodes)]
    states: list[State] = []
    for traj in trajs:
        start = starts[int(rng.integers(len(starts)))] if starts else None
        traj.start = start
        states.append(env.reset(start))
    active = list(range(n_episodes))
    while active:
        actions, logps, values = snapshot.sample([states[i] for i in active], rng)
        still = []
        for j, i in enumerate(active):
            out = env.step(states[i], actions[j])
            trajs[i].transitions.append(Transition(states[i], actions[j], float(logps[j]), float(values[j]),
                                                   out.reward.total, out.next.done, out.reward, out.infeasible))
            states[i] = out.next
            if not out.next.done:
                still.append(i)
        active = still
    for traj, final in zip(trajs, states):
        traj.final_state = final
    return trajs


def compute_advantages(traj: Trajectory, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """GAE(λ) advantages and returns for one complete trajectory."""
    if not traj.complete:
        raise ContractError("advantages need a trajectory that ends in a terminal state")
    rewards = np.array([t.reward for t in traj.transitions])
    values = np.array([t.value_old for t in traj.transitions])
    dones = np.array([t.done for t in traj.transitions], dtype=float)
    T = len(rewards)
    next_values = np.append(values[1:], 0.0)
    deltas = rewards + gamma * next_values * (1.0 - dones) - values
    adv = np.zeros(T)
    running = 0.0
    for t in reversed(range(T)):
        running = deltas[t] + gamma * lam * (1.0 - dones[t]) * running
        adv[t] = running
    return adv, adv + values


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    std = adv.std()
    return (adv - adv.mean()) / max(std, eps)
