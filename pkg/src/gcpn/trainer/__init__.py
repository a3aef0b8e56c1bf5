"""Learning loops: PPO, expert imitation, discriminator and hill climbing."""
from .adversarial import balanced_accuracy, discriminator_loss, train_discriminator
from .expert import (construction_trajectory, expert_actions, expert_pair, expert_pretrain, expert_state,
                     expert_step, trajectory_nll, uniform_trajectory_nll)
from .hillclimb import ClimbResult, climb, hill_climb
from .loop import (REPORT_FIELDS, IterationRecord, Trainer, TrainReport, load_models, save_models,
                   summarize_episodes, train)
from .ppo import PpoBatch, PpoConfig, clipped_surrogate, make_batch, ppo_loss, ppo_update
from .rollout import Trajectory, Transition, collect_rollouts, compute_advantages, normalize_advantages

__all__ = [
    "balanced_accuracy", "discriminator_loss", "train_discriminator", "construction_trajectory",
    "expert_actions", "expert_pair", "expert_pretrain", "expert_state", "expert_step", "trajectory_nll",
    "uniform_trajectory_nll", "ClimbResult", "climb", "hill_climb", "REPORT_FIELDS", "IterationRecord",
    "Trainer", "TrainReport", "load_models", "save_models", "summarize_episodes", "train", "PpoBatch",
    "PpoConfig", "clipped_surrogate", "make_batch", "ppo_loss", "ppo_update", "Trajectory",
    "Transition", "collect_rollouts", "compute_advantages", "normalize_advantages",
]
