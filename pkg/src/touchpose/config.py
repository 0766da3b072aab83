"""Flat key-value configuration with a typed schema.

Config files are plain text, one ``section.key = value`` per line, ``#``
comments allowed. Every key must exist in the schema; unknown keys are
rejected so typos in sweep configs fail fast. Lists are comma-separated.

Example::

    hand.l1 = 0.04
    reward.variant = TMB
    run.seeds = 0, 1, 2
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError

REWARD_VARIANTS = ("TMBP", "TMB", "TB", "TM", "TMP", "TBP")
STATE_MASKS = ("BFTRM", "FTRM", "BFTR")


@dataclass(frozen=True)
class HandConfig:
    l1: float = 0.035               # proximal link length (m)
    l2: float = 0.025               # distal link length (m)
    coupling: float = 0.7           # passive distal angle = coupling * q
    q_max: float = 1.3              # bend limit (rad)
    patch_radius: float = 0.004     # sensor disc radius (m)
    finger_radius: float = 0.007    # patch offset from the link axis (m)
    translate_step: float = 0.005   # wrist translation action step (m)
    rotate_step: float = 0.1        # wrist rotation action step (rad)
    bend_step: float = 0.02         # finger bend increment (rad)


@dataclass(frozen=True)
class WorkspaceConfig:
    half_x: float = 0.16
    half_y: float = 0.16
    z_min: float = -0.20
    z_max: float = 0.06
    max_tilt: float = 1.0           # per-axis orientation limit (rad)


@dataclass(frozen=True)
class EnvConfig:
    horizon: int = 400
    lost_contact_limit: int = 5     # reset after more consecutive misses
    approach_step: float = 0.005    # initial approach increment (m)
    start_offset: float = 0.14      # start wrist distance from center (m)
    pose_jitter: float = 0.01       # object position jitter half-range (m)


@dataclass(frozen=True)
class FeatureConfig:
    boundary_cap: float = 0.5       # distance cap when no plane opposes (m)
    memory_radius: float = 0.08     # contact memory filter radius (m)
    memory_cell: float = 0.01       # contact memory voxel size (m)
    mask: str = "BFTRM"


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 5.0
    repeat_penalty: float = -1.0
    eval_period: int = 50           # pose feedback every this many steps
    history_len: int = 20           # short-memory window
    visit_cell: float = 0.005       # finger visit discretization (m)
    orient_bin: float = 0.2         # pose discretization orientation bin (rad)
    variant: str = "TMBP"
    feedback_resample: int = 800    # lighter recon settings for in-training
    feedback_viewpoints: int = 4    # pose feedback (full recon cfg is used
    feedback_max_bpa: int = 400     # for evaluation metrics)
    feedback_max_register: int = 400

    def __post_init__(self):
        if self.variant not in REWARD_VARIANTS:
            raise ConfigError(
                f"unknown reward variant {self.variant!r} (known: {', '.join(REWARD_VARIANTS)})"
            )
        if self.eval_period < 1:
            raise ConfigError("reward.eval_period must be >= 1")
        if self.repeat_penalty >= 0:
            raise ConfigError("reward.repeat_penalty must be negative")

    @property
    def memory_on(self) -> bool:
        return "M" in self.variant

    @property
    def bonus_on(self) -> bool:
        return "B" in self.variant

    @property
    def pose_on(self) -> bool:
        return "P" in self.variant


@dataclass(frozen=True)
class ReconConfig:
    resample_points: int = 2000
    viewpoints: int = 6
    cap_half_angle: float = np.pi / 3.0
    image_width: int = 128
    image_height: int = 128
    fx: float = 120.0
    fy: float = 120.0
    cx: float = 64.0
    cy: float = 64.0
    splat_radius: int = 1
    bpa_radius_factors: tuple = (1.5, 3.0, 6.0)
    max_bpa_points: int = 800       # voxel-downsample denser clouds first
    max_register_points: int = 600
    model_sample_points: int = 2000
    icp_max_iter: int = 50
    icp_tol: float = 1e-6
    icp_trim: float = 0.9
    extra_rotations: int = 36
    d_max: float = 0.1              # ADD-S accuracy threshold sweep limit (m)
    min_contacts: int = 4
    iou_cell: float = 0.01
    iou_samples: int = 4000


@dataclass(frozen=True)
class PolicyConfig:
    hidden: tuple = (64, 64)
    lr: float = 3e-4
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 256
    rollout: int = 2048
    discount: float = 0.99
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    entropy_coef: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    objects: tuple = ("cuboid",)
    variants: tuple = ("grid", "TMBP")
    seeds: tuple = (0, 1, 2)
    trials: int = 4
    step_cap: int = 150
    budget: int = 200_000           # training env steps


@dataclass(frozen=True)
class Config:
    hand: HandConfig = field(default_factory=HandConfig)
    workspace: WorkspaceConfig = field(default_factory=WorkspaceConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    recon: ReconConfig = field(default_factory=ReconConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    run: RunConfig = field(default_factory=RunConfig)


_SECTIONS = {f.name: f.default_factory for f in fields(Config)}


def _parse_scalar(text: str, kind):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _coerce(value: str, template):
    if isinstance(template, tuple):
        items = [x.strip() for x in value.split(",") if x.strip()]
        elem = type(template[0]) if template else str
        return tuple(_parse_scalar(x, elem) for x in items)
    return _parse_scalar(value, type(template))


def parse_config_text(text: str, base: Config | None = None, path=None) -> Config:
    cfg = base or Config()
    sections = {name: getattr(cfg, name) for name in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path or '<config>'}:{lineno}: expected 'section.key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"{path or '<config>'}:{lineno}: key {key!r} missing section prefix")
        section, _, name = key.partition(".")
        if section not in sections:
            raise ConfigError(f"{path or '<config>'}:{lineno}: unknown section {section!r}")
        block = sections[section]
        if not hasattr(block, name):
            raise ConfigError(f"{path or '<config>'}:{lineno}: unknown key {key!r}")
        template = getattr(block, name)
        try:
            parsed = _coerce(value, template)
        except ValueError as exc:
            raise ConfigError(f"{path or '<config>'}:{lineno}: {exc}") from None
        sections[section] = replace(block, **{name: parsed})
    return Config(**sections)


def load_config(path=None, overrides: dict | None = None) -> Config:
    cfg = Config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), cfg, path=path)
    if overrides:
        lines = "\n".join(f"{k} = {_format_value(v)}" for k, v in overrides.items())
        cfg = parse_config_text(lines, cfg, path="<overrides>")
    return cfg


def _format_value(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(str(x) for x in v)
    return str(v)


def dump_config(cfg: Config) -> str:
    """Canonical text form: every key, sorted, one per line."""
    lines = []
    for section_field in sorted(_SECTIONS):
        block = getattr(cfg, section_field)
        for f in sorted(fields(block), key=lambda x: x.name):
            lines.append(f"{section_field}.{f.name} = {_format_value(getattr(block, f.name))}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: Config) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()[:16]


def validate_mask(mask: str) -> str:
    if mask not in STATE_MASKS:
        raise ConfigError(f"unknown state mask {mask!r} (known: {', '.join(STATE_MASKS)})")
    return mask
