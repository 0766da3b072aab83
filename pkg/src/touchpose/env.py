"""Episodic tactile exploration environment.

An episode fixes one object at a seeded random pose, advances the hand
along its approach axis until first touch, then repeats the cycle: apply
a wrist action, bend fingers until contact, record the touching patches
into the contact cloud, and reopen. Episodes end when the wrist leaves
the workspace or tilts too far, when contact is lost for too many
consecutive steps, or at the step horizon.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import Config, EnvConfig, WorkspaceConfig
from .errors import ContractViolation, InitializationError
from .geometry import (
    Plane,
    RigidTransform,
    euler_xyz_from_matrix,
    random_rotation,
)
from .hand import ActionId, HandModel, HandState, build_hand
from .mesh import ContactCloud, MeshProximity, TriMesh

_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class Workspace:
    """Convex region bounded by planes with inward normals, plus tilt limits."""

    planes: tuple
    max_tilt: float = 1.0

    @staticmethod
    def box(half_x, half_y, z_min, z_max, max_tilt=1.0) -> "Workspace":
        planes = (
            Plane(np.array([-1.0, 0.0, 0.0]), half_x),
            Plane(np.array([1.0, 0.0, 0.0]), half_x),
            Plane(np.array([0.0, -1.0, 0.0]), half_y),
            Plane(np.array([0.0, 1.0, 0.0]), half_y),
            Plane(np.array([0.0, 0.0, -1.0]), z_max),
            Plane(np.array([0.0, 0.0, 1.0]), -z_min),
        )
        return Workspace(planes, max_tilt)

    @staticmethod
    def from_config(cfg: WorkspaceConfig) -> "Workspace":
        return Workspace.box(cfg.half_x, cfg.half_y, cfg.z_min, cfg.z_max, cfg.max_tilt)

    def heights(self, p) -> np.ndarray:
        return np.array([pl.signed_height(p) for pl in self.planes])

    def contains(self, p, margin: float = _EDGE_EPS) -> bool:
        return bool(self.heights(p).min() > margin)

    def tilt_ok(self, rotation: np.ndarray, reference: np.ndarray) -> bool:
        rel = euler_xyz_from_matrix(reference.T @ rotation)
        return bool(np.abs(rel).max() <= self.max_tilt)


class TerminationReason(enum.Enum):
    NONE = "none"
    BOUNDARY = "boundary"
    LOST_CONTACT = "lost_contact"
    HORIZON = "horizon"


@dataclass(frozen=True)
class ContactRecord:
    point: np.ndarray      # on the object surface (base frame)
    normal: np.ndarray     # outward object normal estimate (base frame)
    finger: int
    patch: int


@dataclass(frozen=True)
class StepOutcome:
    new_contacts: tuple
    terminated: bool
    reason: TerminationReason

    def __post_init__(self):
        if self.terminated != (self.reason is not TerminationReason.NONE):
            raise ValueError("terminated flag must match the reason")


@dataclass(frozen=True)
class Observation:
    """Per-step snapshot taken after bending, before fingers reopen."""

    joints: np.ndarray               # (5,) bent joint angles
    touch: np.ndarray                # (5, 5) patch flags
    wrist: RigidTransform
    initial_wrist: RigidTransform
    tip_positions: np.ndarray        # (5, 3) tip patch centers, base frame
    contacts: ContactCloud
    t: int


def contact_query(model: HandModel, state: HandState, proximity: MeshProximity):
    """One record per touching patch of the given hand configuration.

    The recorded point is the exact closest point on the mesh (it lies on
    the surface); the recorded normal is the patch's outward normal
    flipped to the object side, sign-corrected against the local face
    normal so it always points out of the object.
    """
    all_centers, all_normals = model.patch_geometry(state.wrist, state.joints[None, :])
    records = []
    centers = all_centers[0].reshape(-1, 3)
    radius_per = np.repeat(model.patch_radius, 5)
    hit = proximity.within(centers, float(model.patch_radius.max()))
    if not np.allclose(model.patch_radius, model.patch_radius[0]):
        hit = np.zeros(len(centers), dtype=bool)
        for f in range(5):
            seg = slice(5 * f, 5 * (f + 1))
            hit[seg] = proximity.within(centers[seg], float(model.patch_radius[f]))
    idx = np.flatnonzero(hit)
    if len(idx) == 0:
        return records
    closest, dist, face = proximity.closest(centers[idx])
    keep = dist < radius_per[idx]
    for k, flat in enumerate(idx):
        if not keep[k]:
            continue
        f, p = divmod(int(flat), 5)
        est = -all_normals[0, f, p]
        mesh_n = proximity.mesh.face_normals[face[k]]
        if float(np.dot(est, mesh_n)) < 0.0:
            est = -est
        records.append(ContactRecord(closest[k].copy(), est.copy(), f, p))
    return records


class TactileEnv:
    """One exploration episode at a time; reset() starts a new one."""

    def __init__(
        self,
        object_mesh: TriMesh,
        cfg: Config | None = None,
        hand: HandModel | None = None,
        workspace: Workspace | None = None,
    ):
        cfg = cfg or Config()
        self.cfg = cfg.env
        self.object_mesh = object_mesh
        self.hand = hand or build_hand(cfg.hand)
        self.workspace = workspace or Workspace.from_config(cfg.workspace)
        self.center = np.zeros(3)
        self.gt_pose: RigidTransform | None = None
        self.world_mesh: TriMesh | None = None
        self._prox: MeshProximity | None = None
        self._hand_state: HandState | None = None
        self._initial_wrist: RigidTransform | None = None
        self._points: list = []
        self._normals: list = []
        self._steps: list = []
        self.t = 0
        self._streak = 0
        self._terminated = True

    # -- helpers ------------------------------------------------------------

    @property
    def start_position(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.cfg.start_offset])

    def contacts(self) -> ContactCloud:
        if not self._points:
            return ContactCloud()
        return ContactCloud(
            np.asarray(self._points),
            np.asarray(self._normals),
            np.asarray(self._steps, dtype=np.int64),
        )

    def _record(self, records, step):
        for r in records:
            self._points.append(r.point)
            self._normals.append(r.normal)
            self._steps.append(step)

    def _observation(self, snapshot: HandState) -> Observation:
        centers, _ = self.hand.patch_geometry(snapshot.wrist, snapshot.joints[None, :])
        return Observation(
            joints=snapshot.joints.copy(),
            touch=snapshot.touch.copy(),
            wrist=snapshot.wrist,
            initial_wrist=self._initial_wrist,
            tip_positions=centers[0, :, 0, :].copy(),
            contacts=self.contacts(),
            t=self.t,
        )

    # -- episode lifecycle ----------------------------------------------------

    def reset(self, seed: int) -> Observation:
        """Pose the object, approach until first touch, seed the contacts."""
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(-self.cfg.pose_jitter, self.cfg.pose_jitter, 3)
        self.gt_pose = RigidTransform(random_rotation(rng), self.center + jitter)
        self.world_mesh = self.object_mesh.transformed(self.gt_pose)
        self._prox = MeshProximity(self.world_mesh)
        self._points, self._normals, self._steps = [], [], []
        self.t = 0
        self._streak = 0
        self._terminated = False

        state = HandState(RigidTransform(np.eye(3), self.start_position))
        self._initial_wrist = state.wrist
        approach = state.wrist.axis(2)  # palm normal
        max_steps = int(np.ceil(2.0 * self.cfg.start_offset / self.cfg.approach_step)) + 2
        snapshot = None
        for _ in range(max_steps):
            if not self.workspace.contains(state.wrist.translation):
                break
            probe = self.hand.bend_fingers_until_contact(state, self._prox)
            if probe.touch.any():
                snapshot = probe
                break
            state = HandState(
                RigidTransform(
                    state.wrist.rotation,
                    state.wrist.translation + approach * self.cfg.approach_step,
                )
            )
        if snapshot is None:
            self._terminated = True
            raise InitializationError(
                "no contact reachable along the approach axis inside the workspace"
            )
        records = contact_query(self.hand, snapshot, self._prox)
        self._record(records, step=0)
        self._hand_state = self.hand.open_fingers(snapshot)
        return self._observation(snapshot)

    def step(self, action: ActionId):
        """Advance one exploration step; returns (observation, outcome).

        The observation is None when the step terminated on a boundary
        violation (there is no valid post-step configuration to observe).
        """
        if self._terminated:
            raise ContractViolation("step() called on a terminated episode")
        action = ActionId(action)
        moved = self.hand.apply_action(self._hand_state, action)
        pos_ok = self.workspace.contains(moved.wrist.translation)
        tilt_ok = self.workspace.tilt_ok(moved.wrist.rotation, self._initial_wrist.rotation)
        if not (pos_ok and tilt_ok):
            self.t += 1
            self._terminated = True
            self._hand_state = moved
            return None, StepOutcome((), True, TerminationReason.BOUNDARY)

        bent = self.hand.bend_fingers_until_contact(moved, self._prox)
        records = contact_query(self.hand, bent, self._prox)
        self.t += 1
        self._record(records, step=self.t)
        self._streak = 0 if records else self._streak + 1
        self._hand_state = self.hand.open_fingers(bent)

        reason = TerminationReason.NONE
        if self._streak > self.cfg.lost_contact_limit:
            reason = TerminationReason.LOST_CONTACT
        elif self.t >= self.cfg.horizon:
            reason = TerminationReason.HORIZON
        self._terminated = reason is not TerminationReason.NONE
        outcome = StepOutcome(tuple(records), self._terminated, reason)
        return self._observation(bent), outcome

    @property
    def terminated(self) -> bool:
        return self._terminated

    @property
    def wrist(self) -> RigidTransform:
        return self._hand_state.wrist
