"""Simplified five-finger sensor hand.

Wrist frame convention: +z is the palm normal (approach direction), +y is
the finger direction ("up"), +x is lateral ("left"). Each finger has one
actuated revolute joint at the knuckle and one passively coupled distal
joint (distal angle = coupling * q); both rotate about the finger-local x
axis so positive q curls the finger toward +z. Five binary sensor patches
(tip, bottom, left, right, top) sit on the distal link; a patch reports
contact when its center is within the patch radius of the object surface.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import HandConfig
from .geometry import RigidTransform, rot_z
from .mesh import MeshProximity

FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")
PATCH_NAMES = ("tip", "bottom", "left", "right", "top")
NUM_FINGERS = 5
NUM_PATCHES = 5


class ActionId(enum.IntEnum):
    """12 wrist-frame actions: +/- translation and rotation per axis."""

    TRANS_X_POS = 0
    TRANS_X_NEG = 1
    TRANS_Y_POS = 2
    TRANS_Y_NEG = 3
    TRANS_Z_POS = 4
    TRANS_Z_NEG = 5
    ROT_X_POS = 6
    ROT_X_NEG = 7
    ROT_Y_POS = 8
    ROT_Y_NEG = 9
    ROT_Z_POS = 10
    ROT_Z_NEG = 11

    @property
    def is_rotation(self) -> bool:
        return self >= ActionId.ROT_X_POS

    @property
    def axis(self) -> int:
        return (int(self) % 6) // 2

    @property
    def sign(self) -> float:
        return 1.0 if int(self) % 2 == 0 else -1.0

    @property
    def opposite(self) -> "ActionId":
        return ActionId(int(self) ^ 1)


TRANSLATION_ACTIONS = tuple(ActionId(i) for i in range(6))
ROTATION_ACTIONS = tuple(ActionId(i) for i in range(6, 12))


def motion_transform(action: ActionId, translate_step: float, rotate_step: float) -> RigidTransform:
    """The action's rigid motion expressed in the wrist's own frame."""
    axis = np.zeros(3)
    axis[action.axis] = action.sign
    if action.is_rotation:
        c, s = np.cos(action.sign * rotate_step), np.sin(action.sign * rotate_step)
        i = action.axis
        rot = np.eye(3)
        j, k = (i + 1) % 3, (i + 2) % 3
        rot[j, j] = c
        rot[k, k] = c
        rot[j, k] = -s
        rot[k, j] = s
        return RigidTransform(rot, np.zeros(3))
    return RigidTransform(np.eye(3), axis * translate_step)


@dataclass(frozen=True)
class FingerSpec:
    base: RigidTransform          # knuckle frame in the wrist frame
    l1: float
    l2: float
    coupling: float
    q_max: float
    patch_centers: np.ndarray     # (5, 3) in the distal-link frame
    patch_normals: np.ndarray     # (5, 3) outward in the distal-link frame
    patch_radius: float

    def __post_init__(self):
        if not (0.0 < self.q_max <= np.pi / 2 + 1e-9):
            raise ValueError("q_max must lie in (0, pi/2]")
        if self.patch_radius <= 0.0:
            raise ValueError("patch radius must be positive")


def _default_patches(l2: float, finger_radius: float):
    r = finger_radius
    mid = 0.6 * l2
    centers = np.array(
        [
            [0.0, l2, 0.0],    # tip
            [0.0, mid, r],     # bottom (palmar, faces +z at q = 0)
            [r, mid, 0.0],     # left
            [-r, mid, 0.0],    # right
            [0.0, mid, -r],    # top (dorsal)
        ]
    )
    normals = np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    )
    return centers, normals


def build_hand(cfg: HandConfig) -> "HandModel":
    """Default hand: four parallel fingers plus an opposed thumb."""
    centers, normals = _default_patches(cfg.l2, cfg.finger_radius)
    common = dict(
        l1=cfg.l1,
        l2=cfg.l2,
        coupling=cfg.coupling,
        q_max=cfg.q_max,
        patch_centers=centers,
        patch_normals=normals,
        patch_radius=cfg.patch_radius,
    )
    knuckle_y, knuckle_z = 0.035, 0.008
    lateral = {"index": 0.027, "middle": 0.009, "ring": -0.009, "little": -0.027}
    fingers = [
        FingerSpec(
            base=RigidTransform(rot_z(np.pi / 2.0), np.array([0.052, -0.010, knuckle_z])),
            **common,
        )
    ]
    for name in ("index", "middle", "ring", "little"):
        fingers.append(
            FingerSpec(
                base=RigidTransform.from_translation([lateral[name], knuckle_y, knuckle_z]),
                **common,
            )
        )
    return HandModel(tuple(fingers), cfg.translate_step, cfg.rotate_step, cfg.bend_step)


@dataclass(frozen=True)
class HandState:
    wrist: RigidTransform
    joints: np.ndarray = field(default_factory=lambda: np.zeros(NUM_FINGERS))
    touch: np.ndarray = field(
        default_factory=lambda: np.zeros((NUM_FINGERS, NUM_PATCHES), dtype=bool)
    )

    def __post_init__(self):
        q = np.asarray(self.joints, dtype=float).reshape(NUM_FINGERS).copy()
        t = np.asarray(self.touch, dtype=bool).reshape(NUM_FINGERS, NUM_PATCHES).copy()
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "joints", q)
        object.__setattr__(self, "touch", t)


@dataclass(frozen=True)
class FKResult:
    knuckle_frames: tuple          # per finger, after the actuated joint
    distal_frames: tuple           # per finger, after the passive joint
    patch_centers: np.ndarray      # (5, 5, 3) base frame
    patch_normals: np.ndarray      # (5, 5, 3) base frame


class HandModel:
    """Finger geometry plus action and bend step sizes."""

    def __init__(self, fingers, translate_step, rotate_step, bend_step):
        if len(fingers) != NUM_FINGERS:
            raise ValueError("hand model needs exactly five fingers")
        if bend_step <= 0.0:
            raise ValueError("bend step must be positive")
        self.fingers = tuple(fingers)
        self.translate_step = float(translate_step)
        self.rotate_step = float(rotate_step)
        self.bend_step = float(bend_step)
        self.q_max = np.array([f.q_max for f in fingers])
        # Stacked per-finger constants for the vectorized kinematics paths.
        self._base_rot = np.stack([f.base.rotation for f in fingers])        # (5,3,3)
        self._base_t = np.stack([f.base.translation for f in fingers])      # (5,3)
        self._l1 = np.array([f.l1 for f in fingers])
        self._coupling = np.array([f.coupling for f in fingers])
        self._pc = np.stack([f.patch_centers for f in fingers])             # (5,5,3)
        self._pn = np.stack([f.patch_normals for f in fingers])             # (5,5,3)
        self.patch_radius = np.array([f.patch_radius for f in fingers])

    # -- kinematics ---------------------------------------------------------

    def _check_joints(self, q):
        q = np.asarray(q, dtype=float).reshape(NUM_FINGERS)
        if (q < -1e-12).any() or (q > self.q_max + 1e-12).any():
            raise ValueError(f"joint angles outside [0, q_max]: {q}")
        return q

    def patch_geometry(self, wrist: RigidTransform, q_grid: np.ndarray):
        """Patch centers and normals for a grid of joint angles.

        ``q_grid`` has shape (g, 5): one candidate angle per finger per
        row. Returns centers and normals of shape (g, 5, 5, 3) in the
        base frame.
        """
        q = np.asarray(q_grid, dtype=float)
        c1, s1 = np.cos(q), np.sin(q)                          # (g,5)
        full = q * (1.0 + self._coupling)
        c2, s2 = np.cos(full), np.sin(full)
        px = self._pc[None, :, :, 0]                           # (1,5,5)
        py = self._pc[None, :, :, 1]
        pz = self._pc[None, :, :, 2]
        l1 = self._l1[None, :, None]
        cy = l1 * c1[:, :, None] + py * c2[:, :, None] - pz * s2[:, :, None]
        cz = l1 * s1[:, :, None] + py * s2[:, :, None] + pz * c2[:, :, None]
        centers_local = np.stack([np.broadcast_to(px, cy.shape), cy, cz], axis=-1)
        nx = self._pn[None, :, :, 0]
        ny = self._pn[None, :, :, 1]
        nz = self._pn[None, :, :, 2]
        nny = ny * c2[:, :, None] - nz * s2[:, :, None]
        nnz = ny * s2[:, :, None] + nz * c2[:, :, None]
        normals_local = np.stack([np.broadcast_to(nx, nny.shape), nny, nnz], axis=-1)
        # finger frame -> wrist frame -> base frame
        world_rot = wrist.rotation @ self._base_rot            # (5,3,3)
        world_t = wrist.apply(self._base_t)                    # (5,3)
        centers = np.einsum("fij,gfpj->gfpi", world_rot, centers_local) + world_t[None, :, None, :]
        normals = np.einsum("fij,gfpj->gfpi", world_rot, normals_local)
        return centers, normals

    def forward_kinematics(self, state: HandState) -> FKResult:
        q = self._check_joints(state.joints)
        centers, normals = self.patch_geometry(state.wrist, q[None, :])
        knuckles = []
        distals = []
        for i, spec in enumerate(self.fingers):
            cq, sq = np.cos(q[i]), np.sin(q[i])
            rx = np.array([[1.0, 0.0, 0.0], [0.0, cq, -sq], [0.0, sq, cq]])
            knuckle = state.wrist @ spec.base @ RigidTransform._trusted(rx, np.zeros(3))
            qp = spec.coupling * q[i]
            cp, sp = np.cos(qp), np.sin(qp)
            rxp = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
            distal = knuckle @ RigidTransform._trusted(rxp, np.array([0.0, spec.l1, 0.0]))
            knuckles.append(knuckle)
            distals.append(distal)
        return FKResult(tuple(knuckles), tuple(distals), centers[0], normals[0])

    # -- actions ------------------------------------------------------------

    def apply_action(self, state: HandState, action: ActionId) -> HandState:
        """Move the wrist by the action, expressed in the wrist's own frame."""
        motion = motion_transform(ActionId(action), self.translate_step, self.rotate_step)
        return HandState(state.wrist @ motion, state.joints, state.touch)

    def open_fingers(self, state: HandState) -> HandState:
        return HandState(state.wrist, np.zeros(NUM_FINGERS), np.zeros((5, 5), dtype=bool))

    def bend_fingers_until_contact(
        self,
        state: HandState,
        proximity: MeshProximity,
        bend_step: float | None = None,
    ) -> HandState:
        """Advance each finger by the bend step until a patch touches.

        Every finger independently sweeps q upward from its current angle
        in fixed increments, stopping at the first angle where any of its
        patches lies within the patch radius of the surface, or at q_max.
        Fingers already in contact do not move. Touch flags reflect the
        stopping configuration.
        """
        dq = self.bend_step if bend_step is None else float(bend_step)
        if dq <= 0.0:
            raise ValueError("bend step must be positive")
        q0 = self._check_joints(state.joints)
        steps = int(np.ceil((self.q_max - q0).max() / dq + 1e-12)) + 1
        m = np.arange(steps)[:, None]                                  # (g,1)
        grid = np.minimum(q0[None, :] + m * dq, self.q_max[None, :])   # (g,5)
        centers, _ = self.patch_geometry(state.wrist, grid)
        hits = np.zeros((steps, NUM_FINGERS, NUM_PATCHES), dtype=bool)
        for radius in np.unique(self.patch_radius):
            sel = np.flatnonzero(self.patch_radius == radius)
            flat = centers[:, sel].reshape(-1, 3)
            hits[:, sel] = proximity.within(flat, float(radius)).reshape(
                steps, len(sel), NUM_PATCHES
            )
        any_hit = hits.any(axis=2)                                     # (g,5)
        q_final = np.empty(NUM_FINGERS)
        touch = np.zeros((NUM_FINGERS, NUM_PATCHES), dtype=bool)
        for f in range(NUM_FINGERS):
            idx = np.flatnonzero(any_hit[:, f])
            if len(idx):
                stop = int(idx[0])
                q_final[f] = grid[stop, f]
                touch[f] = hits[stop, f]
            else:
                q_final[f] = self.q_max[f]
        return HandState(state.wrist, q_final, touch)


def initial_hand_state(position, rotation=None) -> HandState:
    rot = np.eye(3) if rotation is None else rotation
    return HandState(RigidTransform(rot, np.asarray(position, dtype=float)))
