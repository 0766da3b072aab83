"""PPO training loop over exploration episodes, checkpoints, and curves.

Episodes stream one after another with per-episode visit tables and
history buffers; transitions accumulate into fixed-size rollout batches
between updates. Failure resets (boundary, lost contact) bootstrap with
zero value, horizon truncation bootstraps with the value estimate. The
whole run is reproducible from (seed, config).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import Config, dump_config
from ..env import TactileEnv, TerminationReason
from ..errors import CheckpointError
from ..features import assemble_state, touch_state
from ..mesh import TriMesh
from ..recon.metrics import coverage_iou_mesh
from ..recon.pipeline import PosePipeline
from ..rewards import RewardEngine
from .net import AdamState, PolicyNet
from .ppo import RolloutBatch, compute_gae, ppo_update

CHECKPOINT_VERSION = 1
CURVE_HEADER = ("update", "mean_reward", "mean_iou", "mean_auc")


def policy_digest(cfg: Config, mask: str) -> str:
    """Digest of the config sections that define the policy's contract."""
    text = dump_config(cfg)
    keep = [
        line
        for line in text.splitlines()
        if line.split(".")[0] in ("hand", "workspace", "env", "features", "policy")
    ]
    keep.append(f"mask = {mask}")
    return hashlib.sha256("\n".join(keep).encode("utf-8")).hexdigest()[:16]


def save_checkpoint(path, net: PolicyNet, mask: str, digest: str, meta: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        version=CHECKPOINT_VERSION,
        params=net.params,
        hidden=np.asarray(net.hidden, dtype=np.int64),
        obs_dim=net.obs_dim,
        n_actions=net.n_actions,
        mask=mask,
        digest=digest,
        meta=repr(meta or {}),
    )
    return path


def load_checkpoint(path, expected_digest: str | None = None):
    """Rebuild the policy network; verifies version and config digest."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint version {version} != supported {CHECKPOINT_VERSION}"
            )
        digest = str(data["digest"])
        if expected_digest is not None and digest != expected_digest:
            raise CheckpointError(
                f"checkpoint config digest {digest} does not match current config "
                f"{expected_digest}"
            )
        net = PolicyNet(
            obs_dim=int(data["obs_dim"]),
            n_actions=int(data["n_actions"]),
            hidden=tuple(int(h) for h in data["hidden"]),
            seed=0,
        )
        net.params = data["params"].copy()
        mask = str(data["mask"])
    return net, mask, digest


@dataclass
class TrainResult:
    checkpoint: Path
    curves: Path
    updates: int
    env_steps: int
    episodes: int


class _EpisodeStream:
    """Sequential episodes over one object with deterministic seeding."""

    def __init__(self, mesh: TriMesh, cfg: Config, base_seed: int):
        self.cfg = cfg
        self.mesh = mesh
        self.base_seed = base_seed
        self.env = TactileEnv(mesh, cfg)
        self.episode_idx = -1
        self.engine = None
        self.obs = None
        self._feedback_pipeline = None
        if cfg.reward.pose_on:
            full = PosePipeline(
                mesh, self.env.start_position, self.env.center, cfg.recon
            )
            self._feedback_pipeline = full.lightweight(
                cfg.reward.feedback_resample,
                cfg.reward.feedback_viewpoints,
                cfg.reward.feedback_max_bpa,
                cfg.reward.feedback_max_register,
            )

    def begin_episode(self):
        self.episode_idx += 1
        seed = self.base_seed * 1_000_003 + self.episode_idx
        self.obs = self.env.reset(seed)
        self.engine = RewardEngine(self.cfg.reward)
        if self._feedback_pipeline is not None:
            gt = self.env.gt_pose
            pipe = self._feedback_pipeline
            self.engine.feedback_fn = (
                lambda contacts, t: pipe.estimate_scored(contacts, gt, seed=0).auc
            )
        return self.obs

    def state_vector(self):
        return assemble_state(
            self.obs, self.env.workspace, self.cfg.features, self.cfg.features.mask
        ).vector

    def episode_iou(self) -> float:
        contacts = self.env.contacts()
        return coverage_iou_mesh(
            contacts.points,
            self.mesh,
            self.env.gt_pose,
            self.cfg.recon.iou_cell,
            self.cfg.recon.iou_samples,
        )


def train(
    mesh: TriMesh,
    cfg: Config,
    seed: int,
    out_dir,
    tag: str = "run",
    budget: int | None = None,
    log_fn=None,
) -> TrainResult:
    """Train an exploration policy on one object; writes checkpoint + curves."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    budget = cfg.run.budget if budget is None else int(budget)
    pcfg = cfg.policy
    net = PolicyNet(hidden=pcfg.hidden, seed=seed)
    adam = AdamState.for_params(net.params)
    act_rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    update_rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    digest = policy_digest(cfg, cfg.features.mask)

    curves_path = out_dir / f"curves_{tag}.csv"
    ckpt_path = out_dir / f"checkpoint_{tag}.npz"
    stream = _EpisodeStream(mesh, cfg, seed)

    env_steps = 0
    updates = 0
    episodes = 0
    with open(curves_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER)
        if budget > 0:
            stream.begin_episode()
            episodes = 1
        while env_steps < budget:
            n = min(pcfg.rollout, budget - env_steps)
            obs_buf = np.zeros((n, net.obs_dim))
            act_buf = np.zeros(n, dtype=np.int64)
            logp_buf = np.zeros(n)
            rew_buf = np.zeros(n)
            val_buf = np.zeros(n)
            done_buf = np.zeros(n, dtype=bool)
            boot_buf = np.zeros(n)
            ious = []
            aucs = []
            for i in range(n):
                vec = stream.state_vector()
                action, logp, value = net.act(vec, act_rng)
                prev_obs = stream.obs
                next_obs, outcome = stream.env.step(action)
                if next_obs is None:
                    reward = 0.0
                else:
                    breakdown = stream.engine.step(
                        touch_state(next_obs.touch),
                        next_obs.tip_positions,
                        prev_obs.wrist,
                        next_obs.initial_wrist,
                        int(action),
                        next_obs.contacts,
                        next_obs.t,
                    )
                    reward = breakdown.total
                    if (
                        stream.cfg.reward.pose_on
                        and next_obs.t % stream.cfg.reward.eval_period == 0
                    ):
                        aucs.append(breakdown.pose_term)
                obs_buf[i] = vec
                act_buf[i] = action
                logp_buf[i] = logp
                rew_buf[i] = reward
                val_buf[i] = value
                if outcome.terminated:
                    done_buf[i] = True
                    if outcome.reason is TerminationReason.HORIZON and next_obs is not None:
                        _, _, boot = net.act(
                            assemble_state(
                                next_obs, stream.env.workspace,
                                stream.cfg.features, stream.cfg.features.mask,
                            ).vector
                        )
                        boot_buf[i] = boot
                    ious.append(stream.episode_iou())
                    stream.begin_episode()
                    episodes += 1
                else:
                    stream.obs = next_obs
            env_steps += n
            # value bootstrap at the collection boundary
            if not done_buf[-1]:
                _, _, boot = net.act(stream.state_vector())
                boot_buf[-1] = boot
                done_buf[-1] = True
            batch = RolloutBatch(
                obs_buf, act_buf, logp_buf, rew_buf, val_buf, done_buf, boot_buf
            )
            compute_gae(batch, pcfg.discount, pcfg.gae_lambda)
            ppo_update(net, adam, batch, pcfg, update_rng)
            updates += 1
            row = (
                str(updates),
                "%.6f" % rew_buf.mean(),
                "%.6f" % (np.mean(ious) if ious else float("nan")),
                "%.6f" % (np.mean(aucs) if aucs else float("nan")),
            )
            writer.writerow(row)
            if log_fn is not None:
                log_fn(updates, env_steps, row)
    save_checkpoint(ckpt_path, net, cfg.features.mask, digest,
                    {"tag": tag, "seed": seed, "env_steps": env_steps})
    return TrainResult(ckpt_path, curves_path, updates, env_steps, episodes)
