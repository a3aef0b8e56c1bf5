"""Joint training: PPO on environment rewards, expert imitation and the
adversarial discriminator, interleaved once per iteration."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..chemprops import diversity
from ..env import EnvConfig, MoleculeEnv, RewardHooks
from ..errors import TrainingDivergenceError
from ..molgraph import MolGraph, is_valid
from ..nets import Discriminator, GcpnConfig, GcpnPolicy, save_checkpoint
from ..tensor import AdamState
from ..utils.rng import stream
from .adversarial import train_discriminator
from .expert import expert_step
from .ppo import PpoConfig, make_batch, ppo_update
from .rollout import Trajectory, collect_rollouts

logger = logging.getLogger(__name__)

REPORT_FIELDS = ("iteration", "mean_reward", "mean_property", "validity", "diversity", "success",
                 "disc_accuracy", "policy_loss", "value_loss", "entropy", "expert_loss", "disc_loss")


@dataclass
class IterationRecord:
    iteration: int
    mean_reward: float
    mean_property: float
    validity: float
    diversity: float
    success: float
    disc_accuracy: float
    policy_loss: float
    value_loss: float
    entropy: float
    expert_loss: float
    disc_loss: float

    def to_line(self) -> str:
        parts = []
        for name in REPORT_FIELDS:
            v = getattr(self, name)
            parts.append(f"{name}={v}" if isinstance(v, int) else f"{name}={v:.10g}")
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "IterationRecord":
        kv = dict(item.split("=", 1) for item in line.split())
        return cls(**{k: (int(kv[k]) if k == "iteration" else float(kv[k])) for k in REPORT_FIELDS})


@dataclass
class TrainReport:
    records: list[IterationRecord] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def save_models(path, policy: GcpnPolicy, disc: Discriminator | None = None) -> Path:
    cfg = policy.config
    arrays = {
        "meta.layers": np.array(cfg.layers, dtype=float),
        "meta.embed_dim": np.array(cfg.embed_dim, dtype=float),
        "meta.aggregation": np.array(["sum", "mean", "max", "concat"].index(cfg.aggregation), dtype=float),
        "meta.batch_norm": np.array(float(cfg.batch_norm)),
        "meta.atom_cap": np.array(cfg.atom_cap, dtype=float),
        "meta.readout": np.array(["sum", "mean", "max"].index(cfg.readout), dtype=float),
    }
    arrays.update(policy.state_arrays())
    if disc is not None:
        arrays.update(disc.state_arrays())
    return save_checkpoint(path, arrays)


def load_models(arrays: dict[str, np.ndarray]) -> tuple[GcpnPolicy, Discriminator | None]:
    cfg = GcpnConfig(layers=int(arrays["meta.layers"]), embed_dim=int(arrays["meta.embed_dim"]),
                     aggregation=["sum", "mean", "max", "concat"][int(arrays["meta.aggregation"])],
                     batch_norm=bool(arrays["meta.batch_norm"]), atom_cap=int(arrays["meta.atom_cap"]),
                     readout=["sum", "mean", "max"][int(arrays["meta.readout"])])
    rng = np.random.default_rng(0)
    policy = GcpnPolicy.initialize(cfg, rng)
    policy.load_arrays(arrays)
    disc = None
    if any(k.startswith("d.") for k in arrays):
        disc = Discriminator.initialize(cfg, rng)
        disc.load_arrays(arrays)
    return policy, disc


def summarize_episodes(trajs: Sequence[Trajectory], env: MoleculeEnv) -> dict[str, float]:
    finals = [t.final_graph for t in trajs]
    prop = env.config.prop
    div = diversity(finals) if len(finals) >= 2 else float("nan")
    return {
        "mean_reward": float(np.mean([t.total_reward for t in trajs])),
        "mean_property": float(np.mean([prop.score(g) for g in finals])),
        "validity": float(np.mean([is_valid(g, env.config.atom_cap) for g in finals])),
        "diversity": div,
        "success": float(np.mean([prop.success(g) for g in finals])),
    }


class Trainer:
    """Holds models, optimizers and RNG streams for one training run."""

    def __init__(self, env_config: EnvConfig, ppo: PpoConfig, net_config: GcpnConfig | None = None,
                 corpus: Sequence[MolGraph] = (), policy: GcpnPolicy | None = None,
                 discriminator: Discriminator | None = None, starts: Sequence[MolGraph] | None = None,
                 expert: bool = True):
        self.env_config = env_config
        self.ppo = ppo
        self.net_config = net_config or GcpnConfig(atom_cap=env_config.atom_cap)
        self.corpus = list(corpus)
        self.starts = list(starts) if starts else None
        self.use_expert = expert and bool(self.corpus)
        init = stream(ppo.seed, "init")
        self.policy = policy or GcpnPolicy.initialize(self.net_config, init)
        adversarial = env_config.final_adversarial or env_config.step_adversarial
        self.disc = discriminator
        if adversarial and self.disc is None:
            self.disc = Discriminator.initialize(self.net_config, init)
        self.rng = {name: stream(ppo.seed, name) for name in ("env", "policy", "expert", "discriminator")}
        self.policy_opt = AdamState(lr=ppo.lr)
        self.expert_opt = AdamState(lr=ppo.expert_lr)
        self.disc_opt = AdamState(lr=ppo.disc_lr)
        self.iteration = 0

    def make_env(self) -> MoleculeEnv:
        hooks = RewardHooks()
        if self.disc is not None:
            frozen = self.disc.snapshot()
            hooks = RewardHooks(final_adversarial=frozen.adversarial_reward,
                                step_adversarial=frozen.adversarial_reward)
        return MoleculeEnv(self.env_config, hooks)

    def run_iteration(self) -> IterationRecord:
        self.iteration += 1
        env = self.make_env()
        trajs = collect_rollouts(env, self.policy, self.ppo.episodes, self.rng["env"], self.starts)
        stats = ppo_update(make_batch(self.policy, trajs, self.ppo), self.policy, self.ppo,
                           self.policy_opt, self.rng["policy"])
        expert_loss = math.nan
        if self.use_expert:
            losses = [expert_step(self.policy, self.corpus, self.expert_opt, self.rng["expert"],
                                  self.ppo.minibatch, self.ppo.max_grad_norm)
                      for _ in range(self.ppo.expert_steps)]
            expert_loss = float(np.mean(losses)) if losses else math.nan
        disc_loss = disc_acc = math.nan
        if self.disc is not None and self.corpus:
            fakes = [t.final_graph for t in trajs]
            r = self.rng["discriminator"]
            for _ in range(self.ppo.disc_steps):
                reals = [self.corpus[int(i)] for i in r.integers(len(self.corpus), size=len(fakes))]
                disc_loss, disc_acc = train_discriminator(reals, fakes, self.disc, self.disc_opt)
        summary = summarize_episodes(trajs, env)
        return IterationRecord(self.iteration, summary["mean_reward"], summary["mean_property"],
                               summary["validity"], summary["diversity"], summary["success"], disc_acc,
                               stats["policy_loss"], stats["value_loss"], stats["entropy"], expert_loss,
                               disc_loss)

    def train(self, out_dir: str | Path | None = None,
              on_record: Callable[[IterationRecord], None] | None = None) -> TrainReport:
        report = TrainReport()
        out = Path(out_dir) if out_dir is not None else None
        last_good = None
        if out is not None:
            last_good = save_models(out / "checkpoint_0000.bin", self.policy, self.disc)
            report.checkpoints.append(last_good)
        for _ in range(self.ppo.iterations):
            try:
                record = self.run_iteration()
            except TrainingDivergenceError as exc:
                exc.checkpoint = str(last_good) if last_good else None
                raise
            report.records.append(record)
            if on_record is not None:
                on_record(record)
            if out is not None and (self.iteration % self.ppo.checkpoint_every == 0
                                    or self.iteration == self.ppo.iterations):
                last_good = save_models(out / f"checkpoint_{self.iteration:04d}.bin", self.policy, self.disc)
                report.checkpoints.append(last_good)
        return report


def train(ppo: PpoConfig, env_config: EnvConfig, corpus: Sequence[MolGraph] = (),
          net_config: GcpnConfig | None = None, out_dir=None, **kwargs) -> tuple[TrainReport, Trainer]:
    trainer = Trainer(env_config, ppo, net_config, corpus, **kwargs)
    return trainer.train(out_dir), trainer
