"""Per-step exploration reward.

Per finger: nothing without touch; a fixed penalty when the current
(discretized wrist pose, action) pair already appears in the recent
history; otherwise a touch term plus a visit-count curiosity bonus for
the cell the fingertip landed in. The per-finger mean is combined with a
periodic pose-estimation feedback term scored on the contact cloud
collected so far.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import RewardConfig
from .geometry import RigidTransform, euler_xyz_from_matrix
from .mesh import ContactCloud


class VisitTable:
    """Visit counts per (finger, discretized position) cell."""

    def __init__(self, cell: float):
        if cell <= 0.0:
            raise ValueError("visit cell must be positive")
        self.cell = float(cell)
        self._counts: dict = {}

    def _key(self, finger: int, position) -> tuple:
        p = np.asarray(position, dtype=float)
        return (int(finger), *np.floor(p / self.cell).astype(np.int64).tolist())

    def count(self, finger: int, position) -> int:
        return self._counts.get(self._key(finger, position), 0)

    def visit(self, finger: int, position) -> float:
        """Curiosity bonus 1/n for the n-th visit, then record the visit."""
        key = self._key(finger, position)
        prior = self._counts.get(key, 0)
        self._counts[key] = prior + 1
        return 1.0 / (prior + 1)

    def __len__(self) -> int:
        return len(self._counts)


class HistoryBuffer:
    """Ring of the last k (discretized pose, action) pairs."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("history length must be >= 1")
        self._ring: deque = deque(maxlen=k)

    def __contains__(self, pair) -> bool:
        return pair in self._ring

    def push(self, pair) -> None:
        self._ring.append(pair)

    def __len__(self) -> int:
        return len(self._ring)


def discretize_pose(
    wrist: RigidTransform,
    initial: RigidTransform,
    cell: float,
    orient_bin: float,
) -> tuple:
    pos = np.floor(wrist.translation / cell).astype(np.int64)
    rel = euler_xyz_from_matrix(initial.rotation.T @ wrist.rotation)
    ang = np.floor(rel / orient_bin).astype(np.int64)
    return (*pos.tolist(), *ang.tolist())


def touch_reward(touch_bits, finger: int) -> float:
    """OR over the finger's four touch bits."""
    t = np.asarray(touch_bits).reshape(5, 4)
    return 1.0 if t[finger].any() else 0.0


def memory_check(history: HistoryBuffer, pose_key: tuple, action: int) -> bool:
    return (pose_key, int(action)) in history


@dataclass(frozen=True)
class RewardBreakdown:
    per_finger: np.ndarray      # (5,)
    pose_term: float            # feedback value before weighting
    total: float

    def as_dict(self) -> dict:
        return {
            "per_finger": [float(x) for x in self.per_finger],
            "pose_term": float(self.pose_term),
            "total": float(self.total),
        }


def step_reward(
    touch_bits,
    tip_positions,
    pose_key: tuple,
    action: int,
    table: VisitTable,
    history: HistoryBuffer,
    cfg: RewardConfig,
    pose_feedback_value: float = 0.0,
) -> RewardBreakdown:
    """One step of the per-finger reward rule; mutates table and history.

    ``pose_feedback_value`` must already honor the evaluation period (zero
    off-schedule); it is weighted here and zeroed for variants without the
    feedback term.
    """
    repeated = cfg.memory_on and memory_check(history, pose_key, action)
    per_finger = np.zeros(5)
    tips = np.asarray(tip_positions, dtype=float).reshape(5, 3)
    for f in range(5):
        touched = touch_reward(touch_bits, f)
        if touched == 0.0:
            continue
        if repeated:
            per_finger[f] = cfg.repeat_penalty
            continue
        bonus = table.visit(f, tips[f]) if cfg.bonus_on else 0.0
        per_finger[f] = cfg.alpha * touched + cfg.beta * bonus
    history.push((pose_key, int(action)))
    pose_term = pose_feedback_value if cfg.pose_on else 0.0
    total = per_finger.sum() / 5.0 + cfg.gamma * pose_term
    return RewardBreakdown(per_finger, pose_term, total)


@dataclass
class RewardEngine:
    """Per-episode reward state plus the periodic pose-feedback hook.

    ``feedback_fn(contacts, t) -> float`` runs the reconstruction and
    registration pipeline and returns the pose accuracy in [0, 1]; the
    engine only calls it on schedule and maps failures to zero.
    """

    cfg: RewardConfig = field(default_factory=RewardConfig)
    feedback_fn: object = None

    def __post_init__(self):
        self.reset()

    def reset(self) -> None:
        self.table = VisitTable(self.cfg.visit_cell)
        self.history = HistoryBuffer(self.cfg.history_len)

    def pose_feedback(self, contacts: ContactCloud, t: int) -> float:
        """Feedback value at step t; zero off-schedule or when degenerate."""
        if t <= 0 or t % self.cfg.eval_period != 0:
            return 0.0
        if self.feedback_fn is None:
            return 0.0
        if not _spans_3d(contacts.points):
            return 0.0
        try:
            value = float(self.feedback_fn(contacts, t))
        except Exception:
            return 0.0
        return float(np.clip(value, 0.0, 1.0))

    def step(
        self,
        touch_bits,
        tip_positions,
        wrist_before: RigidTransform,
        initial_wrist: RigidTransform,
        action: int,
        contacts: ContactCloud,
        t: int,
    ) -> RewardBreakdown:
        pose_key = discretize_pose(
            wrist_before, initial_wrist, self.cfg.visit_cell, self.cfg.orient_bin
        )
        feedback = self.pose_feedback(contacts, t) if self.cfg.pose_on else 0.0
        return step_reward(
            touch_bits,
            tip_positions,
            pose_key,
            action,
            self.table,
            self.history,
            self.cfg,
            feedback,
        )


def _spans_3d(points: np.ndarray, tol: float = 1e-9) -> bool:
    """At least four points not all lying in one plane."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 4:
        return False
    centered = p - p.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return bool(s[2] > tol)
