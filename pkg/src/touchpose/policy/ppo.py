"""Generalized advantage estimation and the clipped PPO update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import PolicyConfig
from .net import AdamState, PolicyNet


@dataclass
class RolloutBatch:
    """Aligned per-step arrays from one collection phase.

    ``dones`` marks steps whose episode ended there; ``bootstrap`` holds
    the value used past each step's horizon: zero on failure resets,
    V(next state) on horizon truncation and at the collection boundary.
    """

    obs: np.ndarray
    actions: np.ndarray
    logp_old: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    bootstrap: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)


def compute_gae(batch: RolloutBatch, discount: float, lam: float) -> RolloutBatch:
    n = len(batch)
    adv = np.zeros(n)
    running = 0.0
    for t in reversed(range(n)):
        next_value = batch.bootstrap[t] if batch.dones[t] else (
            batch.values[t + 1] if t + 1 < n else batch.bootstrap[t]
        )
        delta = batch.rewards[t] + discount * next_value - batch.values[t]
        running = delta if batch.dones[t] else delta + discount * lam * running
        adv[t] = running
    batch.advantages = adv
    batch.returns = adv + batch.values
    return batch


def ppo_update(
    net: PolicyNet,
    adam: AdamState,
    batch: RolloutBatch,
    cfg: PolicyConfig,
    rng: np.random.Generator,
) -> dict:
    """Run the clipped-surrogate epochs over shuffled minibatches.

    Advantages are normalized once per batch. Mutates net.params and the
    Adam state; returns aggregate loss statistics. Deterministic for a
    fixed rng state.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty rollout batch")
    if batch.advantages is None:
        compute_gae(batch, cfg.discount, cfg.gae_lambda)
    adv = batch.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    stats_acc: dict = {}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            sel = order[start : start + cfg.minibatch]
            mini = {
                "obs": batch.obs[sel],
                "actions": batch.actions[sel],
                "logp_old": batch.logp_old[sel],
                "advantages": adv[sel],
                "returns": batch.returns[sel],
            }
            _, grad, stats = net.loss_and_grad(
                net.params, mini, cfg.clip, cfg.value_coef, cfg.entropy_coef
            )
            net.params = adam.update(net.params, grad, cfg.lr)
            for k, v in stats.items():
                stats_acc[k] = stats_acc.get(k, 0.0) + v
            count += 1
    return {k: v / count for k, v in stats_acc.items()}
