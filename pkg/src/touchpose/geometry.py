"""Rigid transforms, planes, and point-set utilities.

Conventions used throughout the package: right-handed z-up base frame,
lengths in meters, angles in radians. 3D vectors are plain numpy arrays of
shape (3,); unit vectors are expected to have norm within 1e-9 of 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9
UNIT_TOL = 1e-9


def as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


def normalized(v) -> np.ndarray:
    a = as_vec3(v)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return a / n


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    return abs(np.linalg.norm(np.asarray(v, dtype=float)) - 1.0) <= tol


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    u = normalized(axis)
    c, s = np.cos(angle), np.sin(angle)
    ux, uy, uz = u
    cross = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(u, u)


def matrix_from_euler_xyz(a: float, b: float, c: float) -> np.ndarray:
    """Extrinsic x-y-z Euler angles: rotate about fixed x, then y, then z."""
    return rot_z(c) @ rot_y(b) @ rot_x(a)


def euler_xyz_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Inverse of :func:`matrix_from_euler_xyz`; returns (a, b, c)."""
    r = np.asarray(rot, dtype=float)
    sb = -r[2, 0]
    b = np.arcsin(np.clip(sb, -1.0, 1.0))
    if abs(sb) < 1.0 - 1e-12:
        a = np.arctan2(r[2, 1], r[2, 2])
        c = np.arctan2(r[1, 0], r[0, 0])
    else:
        # Gimbal: only a +/- c is observable; put everything into a.
        a = np.arctan2(-r[0, 1], r[1, 1])
        c = 0.0
    return np.array([a, b, c])


def geodesic_angle(ra: np.ndarray, rb: np.ndarray) -> float:
    """Rotation angle of ra @ rb.T (distance between two rotations)."""
    tr = np.trace(np.asarray(ra) @ np.asarray(rb).T)
    return float(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))


def matrix_from_quaternion(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (Shoemake quaternion method)."""
    u1, u2, u3 = rng.random(3)
    q = np.array(
        [
            np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
            np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
            np.sqrt(u1) * np.sin(2 * np.pi * u3),
            np.sqrt(u1) * np.cos(2 * np.pi * u3),
        ]
    )
    return matrix_from_quaternion(q)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation, mapping points from the local frame out."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        t = as_vec3(self.translation)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=ORTHO_TOL, rtol=0.0):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", _readonly(rot))
        object.__setattr__(self, "translation", _readonly(t))

    @classmethod
    def _trusted(cls, rotation: np.ndarray, translation: np.ndarray) -> "RigidTransform":
        """Skip validation for transforms built from already-valid ones."""
        out = cls.__new__(cls)
        rotation = np.ascontiguousarray(rotation)
        translation = np.ascontiguousarray(translation)
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(out, "rotation", rotation)
        object.__setattr__(out, "translation", translation)
        return out

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_translation(t) -> "RigidTransform":
        return RigidTransform(np.eye(3), as_vec3(t))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self applied after other: (self @ other)(p) = self(other(p))."""
        return RigidTransform._trusted(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform._trusted(np.ascontiguousarray(rt), -(rt @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def axis(self, i: int) -> np.ndarray:
        """i-th column of the rotation: local basis vector in the outer frame."""
        return self.rotation[:, i].copy()


@dataclass(frozen=True)
class Plane:
    """Plane n.x + h = 0 with unit normal n; signed height is n.x + h."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = as_vec3(self.normal)
        if not is_unit(n):
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", _readonly(n))
        object.__setattr__(self, "offset", float(self.offset))

    def signed_height(self, p) -> float:
        return float(np.dot(self.normal, as_vec3(p)) + self.offset)

    def signed_heights(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal + self.offset


def ray_plane_intersection(w, d, plane: Plane):
    """Ray w + k*d against a plane the ray opposes (n . d < 0).

    Returns (k, point) or None when the ray is parallel, non-opposing, or
    the hit lies behind the origin (k < 0).
    """
    w = as_vec3(w)
    d = as_vec3(d)
    nd = float(np.dot(plane.normal, d))
    if abs(nd) < 1e-12 or nd >= 0.0:
        return None
    k = -plane.signed_height(w) / nd
    if k < 0.0:
        return None
    return k, w + k * d


def voxel_indices(points: np.ndarray, cell: float, origin=None) -> np.ndarray:
    """Integer cell index per point: floor((p - origin) / cell).

    Points exactly on a cell boundary land in the higher-index cell.
    """
    if cell <= 0.0:
        raise ValueError("cell size must be positive")
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if origin is not None:
        p = p - as_vec3(origin)
    return np.floor(p / cell).astype(np.int64)


def voxel_downsample(points, cell: float, origin=None) -> np.ndarray:
    """Replace every occupied voxel with the centroid of its member points.

    Output rows are ordered by ascending lexicographic cell index, which
    makes the result deterministic regardless of input order.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if cell <= 0.0:
        raise ValueError("cell size must be positive")
    if len(p) == 0:
        return np.zeros((0, 3))
    idx = voxel_indices(p, cell, origin)
    uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, p)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    return sums / counts[:, None]


def voxel_downsample_with_normals(points, normals, cell: float, origin=None):
    """Voxel centroids plus renormalized mean normals per occupied cell."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    n = np.asarray(normals, dtype=float).reshape(-1, 3)
    if len(p) != len(n):
        raise ValueError("points and normals must have equal length")
    if cell <= 0.0:
        raise ValueError("cell size must be positive")
    if len(p) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    idx = voxel_indices(p, cell, origin)
    uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
    psum = np.zeros((len(uniq), 3))
    nsum = np.zeros((len(uniq), 3))
    np.add.at(psum, inverse, p)
    np.add.at(nsum, inverse, n)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    centroids = psum / counts[:, None]
    norms = np.linalg.norm(nsum, axis=1)
    # A cell whose normals cancel keeps the normal of its first member.
    bad = norms < 1e-12
    if bad.any():
        first = np.full(len(uniq), -1, dtype=np.int64)
        for i, cell_id in enumerate(inverse):
            if first[cell_id] < 0:
                first[cell_id] = i
        nsum[bad] = n[first[bad]]
        norms = np.linalg.norm(nsum, axis=1)
    return centroids, nsum / norms[:, None]
