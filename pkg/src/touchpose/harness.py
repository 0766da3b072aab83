"""Rollout evaluation, ablation tables, step logs, and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, REWARD_VARIANTS, config_digest, validate_mask
from .env import TactileEnv
from .errors import ConfigError
from .features import assemble_state, touch_state
from .geometry import euler_xyz_from_matrix
from .hand import ActionId
from .mesh import TriMesh
from .objects import get_object
from .policy.grid import GridSearchState, RandomPolicy, grid_policy_step
from .policy.net import PolicyNet
from .policy.train import load_checkpoint, policy_digest
from .recon.metrics import coverage_iou_mesh
from .recon.pipeline import PosePipeline
from .rewards import RewardEngine

BASELINES = ("grid", "random")


@dataclass(frozen=True)
class ResultRow:
    variant: str
    object_name: str
    mean_iou: float
    mean_auc: float
    trials: int
    seeds: tuple

    def csv_row(self):
        return (
            self.variant,
            self.object_name,
            "%.6f" % self.mean_iou,
            "%.6f" % self.mean_auc,
            str(self.trials),
            ";".join(str(s) for s in self.seeds),
        )


RESULT_HEADER = ("variant", "object", "mean_iou", "mean_auc", "trials", "seeds")


class _GridRunner:
    def __init__(self, cfg: Config):
        self.gs = GridSearchState(cfg.hand.translate_step, cfg.hand.rotate_step)

    def step(self, obs, sv):
        return grid_policy_step(self.gs, sv, obs.wrist.rotation)

    def after(self, outcome):
        self.gs.note_contacts([r.normal for r in outcome.new_contacts])


class _NetRunner:
    def __init__(self, net: PolicyNet):
        self.net = net

    def step(self, obs, sv):
        return ActionId(self.net.act(sv.vector)[0])

    def after(self, outcome):
        pass


class _RandomRunner:
    def __init__(self, seed: int):
        self.policy = RandomPolicy(seed)

    def step(self, obs, sv):
        return ActionId(self.policy.act(None)[0])

    def after(self, outcome):
        pass


def _make_runner(policy_spec, cfg: Config, seed: int, mask: str):
    """(runner, mask) for a baseline name or checkpoint path."""
    if policy_spec == "grid":
        return _GridRunner(cfg), mask
    if policy_spec == "random":
        return _RandomRunner(seed * 7919 + 13), mask
    if isinstance(policy_spec, PolicyNet):
        return _NetRunner(policy_spec), mask
    path = Path(policy_spec)
    net, ckpt_mask, _ = load_checkpoint(path, policy_digest(cfg, validate_mask_of(path, cfg)))
    return _NetRunner(net), ckpt_mask


def validate_mask_of(path, cfg: Config) -> str:
    """Mask stored in a checkpoint, needed to compute its digest."""
    with np.load(path, allow_pickle=False) as data:
        return str(data["mask"])


@dataclass
class EpisodeMetrics:
    steps: int
    contacts: int
    iou: float
    auc: float
    add_s: float
    terminated_reason: str


def run_episode(
    mesh: TriMesh,
    cfg: Config,
    policy_spec,
    seed: int,
    cap: int,
    mask: str | None = None,
    engine: RewardEngine | None = None,
    jsonl_path=None,
    pipeline: PosePipeline | None = None,
) -> EpisodeMetrics:
    """One seeded rollout; returns coverage and pose metrics of the final cloud."""
    mask = validate_mask(mask or cfg.features.mask)
    env = TactileEnv(mesh, cfg)
    obs = env.reset(seed)
    runner, mask = _make_runner(policy_spec, cfg, seed, mask)
    log_fh = open(jsonl_path, "w", encoding="utf-8") if jsonl_path else None
    reason = "cap"
    try:
        for _ in range(cap):
            if env.terminated:
                break
            sv = assemble_state(obs, env.workspace, cfg.features, mask)
            action = runner.step(obs, sv)
            prev_obs = obs
            next_obs, outcome = env.step(action)
            runner.after(outcome)
            breakdown = None
            if engine is not None and next_obs is not None:
                breakdown = engine.step(
                    touch_state(next_obs.touch),
                    next_obs.tip_positions,
                    prev_obs.wrist,
                    next_obs.initial_wrist,
                    int(action),
                    next_obs.contacts,
                    next_obs.t,
                )
            if log_fh is not None:
                log_fh.write(json.dumps(_step_record(env, action, next_obs, outcome, breakdown)))
                log_fh.write("\n")
            if outcome.terminated:
                reason = outcome.reason.value
                break
            obs = next_obs
    finally:
        if log_fh is not None:
            log_fh.close()

    contacts = env.contacts()
    iou = coverage_iou_mesh(
        contacts.points, mesh, env.gt_pose, cfg.recon.iou_cell, cfg.recon.iou_samples
    )
    pipeline = pipeline or PosePipeline(mesh, env.start_position, env.center, cfg.recon)
    try:
        est = pipeline.estimate_scored(contacts, env.gt_pose, seed=0)
        auc, adds = est.auc, est.add_s
    except Exception:
        auc, adds = 0.0, float("inf")
    return EpisodeMetrics(env.t, len(contacts), iou, auc, adds, reason)


def _step_record(env, action, next_obs, outcome, breakdown):
    rec = {
        "t": env.t,
        "action": int(action),
        "action_name": ActionId(action).name,
        "terminated": outcome.terminated,
        "reason": outcome.reason.value,
    }
    if next_obs is not None:
        rel = next_obs.initial_wrist.rotation.T @ next_obs.wrist.rotation
        rec.update(
            {
                "wrist_pos": [round(float(x), 9) for x in next_obs.wrist.translation],
                "wrist_euler": [round(float(x), 9) for x in euler_xyz_from_matrix(rel)],
                "q": [round(float(x), 9) for x in next_obs.joints],
                "touch": [int(b) for b in touch_state(next_obs.touch)],
                "new_contacts": [
                    {
                        "point": [round(float(x), 9) for x in r.point],
                        "normal": [round(float(x), 9) for x in r.normal],
                        "finger": r.finger,
                        "patch": r.patch,
                    }
                    for r in outcome.new_contacts
                ],
            }
        )
    if breakdown is not None:
        rec["reward"] = breakdown.as_dict()
    return rec


def evaluate(
    policy_spec,
    object_name: str,
    cfg: Config,
    trials: int | None = None,
    cap: int | None = None,
    base_seed: int = 0,
    variant_label: str | None = None,
) -> ResultRow:
    """Seeded rollouts of one policy on one object, averaged."""
    trials = cfg.run.trials if trials is None else trials
    cap = cfg.run.step_cap if cap is None else cap
    mesh = get_object(object_name)
    pipeline = PosePipeline(
        mesh, TactileEnv(mesh, cfg).start_position, np.zeros(3), cfg.recon
    )
    seeds = tuple(base_seed + i for i in range(trials))
    ious, aucs = [], []
    for s in seeds:
        m = run_episode(mesh, cfg, policy_spec, s, cap, pipeline=pipeline)
        ious.append(m.iou)
        aucs.append(m.auc)
    label = variant_label or (policy_spec if isinstance(policy_spec, str) else "policy")
    return ResultRow(
        str(label),
        object_name,
        float(np.mean(ious)) if ious else 0.0,
        float(np.mean(aucs)) if aucs else 0.0,
        trials,
        seeds,
    )


def _ablation_policy(variant: str, object_name: str, cfg: Config, checkpoint_dir):
    if variant in BASELINES:
        return variant
    if variant not in REWARD_VARIANTS:
        raise ConfigError(f"unknown ablation variant {variant!r}")
    if checkpoint_dir is not None:
        for pattern in (
            f"checkpoint_{variant}_{object_name}_seed*.npz",
            f"checkpoint_{variant}_*.npz",
        ):
            found = sorted(Path(checkpoint_dir).glob(pattern))
            if found:
                return str(found[0])
    # No trained policy available: deterministic fresh network so the
    # table machinery still produces reproducible rows.
    h = int(hashlib.sha256(f"{variant}:{object_name}".encode()).hexdigest()[:8], 16)
    return PolicyNet(hidden=cfg.policy.hidden, seed=h)


def _ablation_cell(task):
    variant, object_name, cfg, checkpoint_dir = task
    policy = _ablation_policy(variant, object_name, cfg, checkpoint_dir)
    return evaluate(
        policy,
        object_name,
        cfg,
        trials=cfg.run.trials,
        cap=cfg.run.step_cap,
        base_seed=cfg.run.seeds[0] if cfg.run.seeds else 0,
        variant_label=variant,
    )


def run_ablation(cfg: Config, out_dir, checkpoint_dir=None, workers: int = 1, log_fn=None):
    """Variant x object result grid; writes CSV and an aligned text table.

    Cells may run in parallel workers; results are gathered back in
    (variant, object) order so the outputs are byte-identical either way.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (variant, object_name, cfg, checkpoint_dir)
        for variant in cfg.run.variants
        for object_name in cfg.run.objects
    ]
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_ablation_cell, tasks))
    else:
        rows = [_ablation_cell(t) for t in tasks]
    if log_fn is not None:
        for row in rows:
            log_fn(row)
    csv_path = out_dir / "ablation.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_HEADER)
        for row in rows:
            writer.writerow(row.csv_row())
    text_path = out_dir / "ablation.txt"
    text_path.write_text(render_table(rows, cfg.run.objects), encoding="utf-8")
    return rows, csv_path, text_path


def render_table(rows, objects) -> str:
    """Paper-style layout: variants down, (IoU, AUC) pairs per object across."""
    by_key = {(r.variant, r.object_name): r for r in rows}
    variants = []
    for r in rows:
        if r.variant not in variants:
            variants.append(r.variant)
    headers = ["variant"]
    for obj in objects:
        headers += [f"{obj}/IoU", f"{obj}/AUC"]
    headers += ["avg/IoU", "avg/AUC"]
    table = [headers]
    for v in variants:
        line = [v]
        ious, aucs = [], []
        for obj in objects:
            r = by_key.get((v, obj))
            if r is None:
                line += ["-", "-"]
            else:
                line += ["%.3f" % r.mean_iou, "%.3f" % r.mean_auc]
                ious.append(r.mean_iou)
                aucs.append(r.mean_auc)
        line += [
            "%.3f" % np.mean(ious) if ious else "-",
            "%.3f" % np.mean(aucs) if aucs else "-",
        ]
        table.append(line)
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    out = []
    for k, row in enumerate(table):
        out.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        if k == 0:
            out.append("-" * len(out[0]))
    return "\n".join(out) + "\n"


def write_manifest(out_dir, command: str, cfg: Config, seeds, extra: dict | None = None):
    """Reproducibility record: digest + seeds + versions for this run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "touchpose",
        "version": __version__,
        "command": command,
        "config_digest": config_digest(cfg),
        "seeds": list(seeds),
        "numpy_version": np.__version__,
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
