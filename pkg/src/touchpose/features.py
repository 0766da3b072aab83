"""Observation blocks and the 38-dim policy state vector.

Blocks (letters used in mask strings): F finger joint angles (5), R wrist
rotation relative to the initial frame as extrinsic x-y-z Euler angles
(3), T touch bits (20), B boundary distances along the six translation
directions (6), M local contact memory along the four lateral directions
(4). Masked-out blocks are zeroed in place so the vector width stays
fixed across ablations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FeatureConfig, validate_mask
from .env import Observation, Workspace
from .errors import ContractViolation
from .geometry import euler_xyz_from_matrix, ray_plane_intersection, voxel_downsample

STATE_DIM = 38
_BLOCK_SLICES = {
    "F": slice(0, 5),
    "R": slice(5, 8),
    "T": slice(8, 28),
    "B": slice(28, 34),
    "M": slice(34, 38),
}

# Lateral directions in the wrist frame, in contact-memory order.
_LEFT, _RIGHT, _UP, _DOWN = (
    np.array([1.0, 0.0, 0.0]),
    np.array([-1.0, 0.0, 0.0]),
    np.array([0.0, 1.0, 0.0]),
    np.array([0.0, -1.0, 0.0]),
)


def touch_state(flags) -> np.ndarray:
    """Fold 5x5 patch flags into the 20-bit per-finger touch encoding.

    Per finger the bits are (tip, bottom, left, right); the top patch has
    no slot of its own and is OR-ed into the tip bit.
    """
    f = np.asarray(flags, dtype=bool).reshape(5, 5)
    out = np.zeros((5, 4))
    out[:, 0] = f[:, 0] | f[:, 4]
    out[:, 1:] = f[:, 1:4]
    return out.reshape(20)


def boundary_distances(position, rotation, workspace: Workspace, cap: float) -> np.ndarray:
    """Free travel along +/- of each wrist axis until the nearest plane.

    Only planes the direction opposes (n . d < 0) count; a direction with
    no opposing plane gets the configured cap. The wrist must be strictly
    inside the workspace.
    """
    w = np.asarray(position, dtype=float)
    if workspace.heights(w).min() < 0.0:
        raise ContractViolation("wrist is outside the workspace")
    rot = np.asarray(rotation, dtype=float)
    out = np.full(6, cap)
    for a in range(6):
        d = rot[:, a // 2] * (1.0 if a % 2 == 0 else -1.0)
        best = cap
        for plane in workspace.planes:
            hit = ray_plane_intersection(w, d, plane)
            if hit is not None:
                best = min(best, hit[0])
        out[a] = best
    return out


def local_contact_memory(
    contact_points, position, rotation, radius: float, cell: float
) -> np.ndarray:
    """Summed positive projections of nearby past contacts, per direction.

    Contacts within ``radius`` of the wrist are re-expressed relative to
    the wrist position, voxel-filtered, and projected on the four lateral
    wrist directions (left, right, up, down); only positive components
    accumulate, so each entry says how much explored surface lies that
    way.
    """
    if radius <= 0.0 or cell <= 0.0:
        raise ValueError("radius and cell must be positive")
    pts = np.asarray(contact_points, dtype=float).reshape(-1, 3)
    out = np.zeros(4)
    if len(pts) == 0:
        return out
    w = np.asarray(position, dtype=float)
    rel = pts - w
    near = rel[np.einsum("ij,ij->i", rel, rel) < radius * radius]
    if len(near) == 0:
        return out
    filtered = voxel_downsample(near, cell)
    rot = np.asarray(rotation, dtype=float)
    for k, local_dir in enumerate((_LEFT, _RIGHT, _UP, _DOWN)):
        d = rot @ local_dir
        proj = filtered @ d
        out[k] = proj[proj > 0.0].sum()
    return out


@dataclass(frozen=True)
class StateVector:
    joints: np.ndarray
    rotation: np.ndarray
    touch: np.ndarray
    boundary: np.ndarray
    memory: np.ndarray
    mask: str

    @property
    def vector(self) -> np.ndarray:
        v = np.zeros(STATE_DIM)
        blocks = {
            "F": self.joints,
            "R": self.rotation,
            "T": self.touch,
            "B": self.boundary,
            "M": self.memory,
        }
        for letter, block in blocks.items():
            if letter in self.mask:
                v[_BLOCK_SLICES[letter]] = block
        return v


def assemble_state(
    obs: Observation,
    workspace: Workspace,
    cfg: FeatureConfig | None = None,
    mask: str | None = None,
) -> StateVector:
    cfg = cfg or FeatureConfig()
    mask = validate_mask(mask if mask is not None else cfg.mask)
    rel = obs.initial_wrist.rotation.T @ obs.wrist.rotation
    return StateVector(
        joints=obs.joints.copy(),
        rotation=euler_xyz_from_matrix(rel),
        touch=touch_state(obs.touch),
        boundary=boundary_distances(
            obs.wrist.translation, obs.wrist.rotation, workspace, cfg.boundary_cap
        ),
        memory=local_contact_memory(
            obs.contacts.points,
            obs.wrist.translation,
            obs.wrist.rotation,
            cfg.memory_radius,
            cfg.memory_cell,
        ),
        mask=mask,
    )
