"""Non-learning baselines: boustrophedon grid sweep and uniform random.

The grid sweep climbs until the workspace top is within one step, side
steps once, descends to the bottom, side steps again, and repeats; when
the recent contact normals say the palm is badly aligned with the
surface it interleaves the rotation action that best restores alignment.
It never emits an action whose boundary clearance is below the step
size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..features import StateVector
from ..geometry import rotation_about_axis
from ..hand import ActionId

_UP, _DOWN = ActionId.TRANS_Y_POS, ActionId.TRANS_Y_NEG
_LEFT, _RIGHT = ActionId.TRANS_X_POS, ActionId.TRANS_X_NEG
# boundary-distance slot per translation action id
_B_SLOT = {a: int(a) for a in (_UP, _DOWN, _LEFT, _RIGHT)}
_ALIGN_LIMIT = np.deg2rad(30.0)


@dataclass
class GridSearchState:
    """Sweep phase plus the rolling window of recent contact normals."""

    translate_step: float = 0.005
    rotate_step: float = 0.1
    vertical: ActionId = _UP
    lateral: ActionId = _RIGHT
    recent_normals: deque = field(default_factory=lambda: deque(maxlen=25))

    def note_contacts(self, normals) -> None:
        for n in normals:
            self.recent_normals.append(np.asarray(n, dtype=float))


def _alignment_action(gs: GridSearchState, wrist_rotation: np.ndarray):
    """Rotation that best re-aims the palm at the touched surface, if needed."""
    if not gs.recent_normals:
        return None
    mean_n = np.mean(gs.recent_normals, axis=0)
    norm = np.linalg.norm(mean_n)
    if norm < 1e-9:
        return None
    # Surface outward normal in the wrist frame; the palm axis +z should
    # oppose it (palm facing the surface).
    n_local = wrist_rotation.T @ (mean_n / norm)
    target = -n_local
    deviation = np.arccos(np.clip(target[2], -1.0, 1.0))
    if deviation <= _ALIGN_LIMIT:
        return None
    best = None
    best_dev = deviation - 1e-9
    for action in (ActionId(i) for i in range(6, 12)):
        axis = np.zeros(3)
        axis[action.axis] = action.sign
        rot = rotation_about_axis(axis, gs.rotate_step)
        new_dev = np.arccos(np.clip((rot.T @ target)[2], -1.0, 1.0))
        if new_dev < best_dev:
            best, best_dev = action, new_dev
    return best


def grid_policy_step(gs: GridSearchState, obs: StateVector,
                     wrist_rotation: np.ndarray | None = None) -> ActionId:
    """Next sweep action given the boundary-distance block of the state."""
    if wrist_rotation is not None:
        align = _alignment_action(gs, wrist_rotation)
        if align is not None:
            return align
    b = obs.boundary
    step = gs.translate_step

    def clear(action: ActionId) -> bool:
        return b[_B_SLOT[action]] > step + 1e-12

    if clear(gs.vertical):
        return gs.vertical
    # Column finished: flip the vertical direction and take one side step.
    gs.vertical = _DOWN if gs.vertical == _UP else _UP
    if clear(gs.lateral):
        return gs.lateral
    gs.lateral = _LEFT if gs.lateral == _RIGHT else _RIGHT
    if clear(gs.lateral):
        return gs.lateral
    if clear(gs.vertical):
        return gs.vertical
    # Boxed in laterally; fall back to the most open translation.
    order = np.argsort(-b, kind="stable")
    return ActionId(int(order[0]))


class RandomPolicy:
    """Uniform random action baseline with its own seeded stream."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def act(self, obs_vec, rng=None):
        return int(self.rng.integers(0, 12)), 0.0, 0.0
