"""Clipped-surrogate policy optimisation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, TrainingDivergenceError
from ..nets import ActionArrays, GcpnPolicy
from ..nets.gcn import GraphBatch
from ..tensor import AdamState, Tensor, adam_step, backward, clip, clip_grad_norm, exp, mean, minimum, mul, square
from .rollout import Trajectory, compute_advantages, normalize_advantages


@dataclass
class PpoConfig:
    clip: float = 0.2
    gamma: float = 1.0
    lam: float = 0.95
    epochs: int = 4
    minibatch: int = 32
    lr: float = 1e-3
    expert_lr: float = 2.5e-4
    disc_lr: float = 1e-3
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    episodes: int = 16
    iterations: int = 100
    expert_steps: int = 1
    disc_steps: int = 1
    checkpoint_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.clip < 1:
            raise ConfigError("clip must lie in (0, 1)")
        if not 0 <= self.gamma <= 1 or not 0 <= self.lam <= 1:
            raise ConfigError("gamma and lam must lie in [0, 1]")
        if self.minibatch < 1 or self.epochs < 1:
            raise ConfigError("minibatch and epochs must be >= 1")


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """Per-sample min(r·A, clip(r, 1-ε, 1+ε)·A)."""
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


@dataclass
class PpoBatch:
    graphs: GraphBatch
    actions: ActionArrays
    log_prob_old: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.log_prob_old)

    def subset(self, idx) -> "PpoBatch":
        return PpoBatch(self.graphs.subset(idx), self.actions.subset(idx), self.log_prob_old[idx],
                        self.advantages[idx], self.returns[idx])


def make_batch(policy: GcpnPolicy, trajs: Sequence[Trajectory], cfg: PpoConfig) -> PpoBatch:
    advs, rets, states, actions, old = [], [], [], [], []
    for traj in trajs:
        a, r = compute_advantages(traj, cfg.gamma, cfg.lam)
        advs.append(a)
        rets.append(r)
        for t in traj.transitions:
            states.append(t.state.graph)
            actions.append(t.action)
            old.append(t.log_prob_old)
    return PpoBatch(policy.batch(states), ActionArrays.from_actions(actions), np.array(old),
                    normalize_advantages(np.concatenate(advs)), np.concatenate(rets))


def ppo_loss(policy: GcpnPolicy, mb: PpoBatch, cfg: PpoConfig) -> tuple[Tensor, dict[str, float]]:
    logp, ent, values = policy.evaluate(mb.graphs, mb.actions, "eval")
    ratio = exp(logp - Tensor(mb.log_prob_old))
    adv = mb.advantages
    surr = minimum(mul(ratio, adv), mul(clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv))
    policy_loss = -mean(surr)
    value_loss = mean(square(values - Tensor(mb.returns)))
    entropy = mean(ent)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    stats = {"policy_loss": policy_loss.item(), "value_loss": value_loss.item(), "entropy": entropy.item()}
    return loss, stats


def ppo_update(batch: PpoBatch, policy: GcpnPolicy, cfg: PpoConfig, opt: AdamState,
               rng: np.random.Generator) -> dict[str, float]:
    """Several epochs of minibatch Adam steps on the clipped objective; returns mean stats."""
    if len(batch) == 0:
        raise ValueError("ppo_update needs a non-empty batch")
    totals: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(batch))
        for start in range(0, len(batch), cfg.minibatch):
            mb = batch.subset(order[start:start + cfg.minibatch])
            loss, stats = ppo_loss(policy, mb, cfg)
            if not np.isfinite(loss.item()):
                raise TrainingDivergenceError(f"non-finite PPO loss ({stats})")
            grads = backward(loss, policy.params)
            clip_grad_norm(grads, cfg.max_grad_norm)
            adam_step(policy.params, grads, opt)
            for k, v in stats.items():
                totals[k] = totals.get(k, 0.0) + v
            count += 1
    return {k: v / count for k, v in totals.items()}
