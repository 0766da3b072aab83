"""Exploration policies: learned (PPO), scripted grid sweep, and random."""

from .grid import GridSearchState, RandomPolicy, grid_policy_step
from .net import AdamState, PolicyNet
from .ppo import RolloutBatch, compute_gae, ppo_update
from .train import TrainResult, load_checkpoint, save_checkpoint, train

__all__ = [
    "PolicyNet",
    "AdamState",
    "RolloutBatch",
    "compute_gae",
    "ppo_update",
    "GridSearchState",
    "grid_policy_step",
    "RandomPolicy",
    "train",
    "TrainResult",
    "save_checkpoint",
    "load_checkpoint",
]
