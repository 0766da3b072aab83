"""Model-based pose registration.

A fixed grid of rotation hypotheses (the 24 signed-permutation rotations
plus extra axis-angle samples), each translated to align centroids, is
refined by trimmed point-to-plane ICP from the observed cloud onto a
dense sample of the known model surface. The hypothesis with the lowest
trimmed RMS wins; ties keep the lower hypothesis id, so the result is
deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import RegistrationFailed
from ..geometry import RigidTransform, rotation_about_axis
from ..mesh import TriMesh, sample_mesh_surface

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def rotation_grid_24() -> list:
    """All 24 signed permutation matrices with determinant +1."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            if np.linalg.det(m) > 0.5:
                out.append(m)
    return out


def fibonacci_directions(n: int) -> np.ndarray:
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * _GOLDEN_ANGLE
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def extra_rotation_grid(n: int) -> list:
    """Deterministic axis-angle rotations that densify the 24-grid."""
    if n <= 0:
        return []
    axes = fibonacci_directions(n)
    angles = np.pi * ((np.arange(n) % 3) + 1) / 3.0
    return [rotation_about_axis(axes[i], angles[i]) for i in range(n)]


class RegistrationTarget:
    """Dense surface sample of the model plus its lookup tree."""

    def __init__(self, mesh: TriMesh, samples: int = 2000, seed: int = 7):
        self.mesh = mesh
        self.points, self.normals = sample_mesh_surface(mesh, samples, seed)
        self.tree = cKDTree(self.points)
        lo, hi = mesh.bounds()
        self.radius = float(np.linalg.norm(hi - lo) / 2.0)
        self.centroid = self.points.mean(axis=0)


@dataclass(frozen=True)
class PoseEstimate:
    transform: RigidTransform
    add_s: float | None = None
    auc: float | None = None
    hypothesis_id: int = -1
    rms: float = float("inf")

    def __post_init__(self):
        if self.auc is not None and not (0.0 <= self.auc <= 1.0):
            raise ValueError("auc must lie in [0, 1]")
        if self.add_s is not None and self.add_s < 0.0:
            raise ValueError("add_s must be non-negative")

    def scored(self, add_s_value: float, auc_value: float) -> "PoseEstimate":
        return PoseEstimate(self.transform, add_s_value, auc_value, self.hypothesis_id, self.rms)


def _trimmed(distances: np.ndarray, trim: float) -> np.ndarray:
    keep = max(1, int(np.floor(trim * len(distances))))
    if keep >= len(distances):
        return np.arange(len(distances))
    return np.argpartition(distances, keep - 1)[:keep]


def icp_point_to_plane(
    data: np.ndarray,
    target: RegistrationTarget,
    initial: RigidTransform,
    max_iter: int = 50,
    tol: float = 1e-6,
    trim: float = 0.9,
):
    """Refine a data->model transform; returns (transform, trimmed RMS).

    Each iteration matches the moved data to its nearest model sample
    points, keeps the closest ``trim`` fraction, and solves the
    linearized point-to-plane system for a small correction. Stops when
    the correction (translation plus rotation arc at the model radius)
    drops below ``tol`` meters.
    """
    transform = initial
    moved = transform.apply(data)
    for _ in range(max_iter):
        dist, idx = target.tree.query(moved, k=1)
        keep = _trimmed(dist, trim)
        d = moved[keep]
        m = target.points[idx[keep]]
        n = target.normals[idx[keep]]
        res = np.einsum("ij,ij->i", d - m, n)
        jac = np.hstack([n, np.cross(d, n)])
        try:
            z, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        except np.linalg.LinAlgError:
            break
        t_step, r_step = z[:3], z[3:]
        angle = np.linalg.norm(r_step)
        rot = rotation_about_axis(r_step, angle) if angle > 1e-15 else np.eye(3)
        delta = RigidTransform(rot, t_step)
        transform = delta @ transform
        moved = transform.apply(data)
        if np.linalg.norm(t_step) + angle * target.radius < tol:
            break
    dist, _ = target.tree.query(moved, k=1)
    keep = _trimmed(dist, trim)
    rms = float(np.sqrt(np.mean(dist[keep] ** 2)))
    return transform, rms


def register_pose(
    data_points,
    target: RegistrationTarget,
    max_iter: int = 50,
    tol: float = 1e-6,
    trim: float = 0.9,
    extra_rotations: int = 36,
) -> PoseEstimate:
    """Best model pose explaining the observed points (base frame).

    The returned transform maps model-frame points to the base frame.
    """
    data = np.asarray(data_points, dtype=float).reshape(-1, 3)
    if len(data) == 0:
        raise RegistrationFailed("no observed points to register")
    data_centroid = data.mean(axis=0)
    best = None
    rotations = rotation_grid_24() + extra_rotation_grid(extra_rotations)
    for hyp_id, rot in enumerate(rotations):
        pose0 = RigidTransform(rot, data_centroid - rot @ target.centroid)
        refined, rms = icp_point_to_plane(
            data, target, pose0.inverse(), max_iter=max_iter, tol=tol, trim=trim
        )
        if best is None or rms < best.rms:
            best = PoseEstimate(
                transform=refined.inverse(), hypothesis_id=hyp_id, rms=rms
            )
    return best
