"""Viewpoint generation, visibility filtering, and pinhole depth rendering.

Cameras use the +z-forward convention: a camera pose maps camera-frame
coordinates into the base frame and its +z column is the viewing
direction. Points in front of a camera therefore have positive depth in
its frame, and a surface point facing the camera satisfies
position . normal < 0 there.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ParseError
from ..geometry import RigidTransform, normalized

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class DepthImage:
    """Dense depth grid in meters; zero marks empty pixels."""

    depth: np.ndarray  # (height, width)

    def __post_init__(self):
        d = np.ascontiguousarray(self.depth, dtype=float)
        if d.ndim != 2:
            raise ValueError("depth must be a 2-D array")
        if not np.isfinite(d).all() or (d < 0).any():
            raise ValueError("depths must be finite and non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "depth", d)

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


def _look_at_rotation(position, target) -> np.ndarray:
    z = normalized(np.asarray(target, float) - np.asarray(position, float))
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(up, z)) > 1.0 - 1e-9:
        up = np.array([1.0, 0.0, 0.0])
    x = normalized(np.cross(up, z))
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def generate_viewpoints(start_position, center, count: int, cap_half_angle: float):
    """Camera poses on a spherical cap around the starting direction.

    All cameras sit at the start's distance from ``center`` and aim at
    it. Placement follows a golden-angle spiral over the cap, with the
    first pose exactly at the start position, so the set is deterministic
    and close to evenly spaced.
    """
    if count < 1:
        raise ValueError("viewpoint count must be >= 1")
    start = np.asarray(start_position, dtype=float)
    center = np.asarray(center, dtype=float)
    offset = start - center
    dist = np.linalg.norm(offset)
    if dist < 1e-12:
        raise ValueError("start position coincides with the center")
    axis = offset / dist
    # Orthonormal frame around the cap axis.
    helper = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(helper, axis)) > 1.0 - 1e-9:
        helper = np.array([1.0, 0.0, 0.0])
    e1 = normalized(np.cross(helper, axis))
    e2 = np.cross(axis, e1)
    poses = []
    denom = max(count - 1, 1)
    for i in range(count):
        cos_t = 1.0 - (i / denom) * (1.0 - np.cos(cap_half_angle))
        sin_t = np.sqrt(max(0.0, 1.0 - cos_t * cos_t))
        phi = i * _GOLDEN_ANGLE
        direction = cos_t * axis + sin_t * (np.cos(phi) * e1 + np.sin(phi) * e2)
        position = center + dist * direction
        poses.append(RigidTransform(_look_at_rotation(position, center), position))
    return poses


def visibility_filter(points, normals, viewpoint: RigidTransform) -> np.ndarray:
    """Points visible from the viewpoint, expressed in its frame.

    A point is kept when, in the camera frame, position . normal is
    strictly negative (the surface faces the camera).
    """
    inv = viewpoint.inverse()
    p = inv.apply(np.asarray(points, dtype=float).reshape(-1, 3))
    n = inv.rotate(np.asarray(normals, dtype=float).reshape(-1, 3))
    keep = np.einsum("ij,ij->i", p, n) < 0.0
    return p[keep]


def render_depth(points_cam, intrinsics: CameraIntrinsics, splat_radius: int = 1) -> DepthImage:
    """Project camera-frame points to a z-buffered depth image.

    u = fx*X/Z + cx and v = fy*Y/Z + cy, rounded to the nearest pixel;
    each point covers the disc of pixels within ``splat_radius`` and the
    minimum depth wins per pixel. Points with Z <= 0 are skipped.
    """
    p = np.asarray(points_cam, dtype=float).reshape(-1, 3)
    depth = np.full((intrinsics.height, intrinsics.width), np.inf)
    front = p[p[:, 2] > 0.0]
    if len(front):
        z = front[:, 2]
        u = np.rint(intrinsics.fx * front[:, 0] / z + intrinsics.cx).astype(np.int64)
        v = np.rint(intrinsics.fy * front[:, 1] / z + intrinsics.cy).astype(np.int64)
        offsets = [
            (du, dv)
            for du in range(-splat_radius, splat_radius + 1)
            for dv in range(-splat_radius, splat_radius + 1)
            if du * du + dv * dv <= splat_radius * splat_radius
        ]
        for du, dv in offsets:
            uu = u + du
            vv = v + dv
            ok = (uu >= 0) & (uu < intrinsics.width) & (vv >= 0) & (vv < intrinsics.height)
            np.minimum.at(depth, (vv[ok], uu[ok]), z[ok])
    depth[~np.isfinite(depth)] = 0.0
    return DepthImage(depth)


def backproject_depth(image: DepthImage, intrinsics: CameraIntrinsics,
                      viewpoint: RigidTransform | None = None) -> np.ndarray:
    """3-D points for every non-empty pixel, optionally mapped to base frame."""
    v, u = np.nonzero(image.depth > 0.0)
    z = image.depth[v, u]
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    pts = np.column_stack([x, y, z])
    if viewpoint is not None:
        pts = viewpoint.apply(pts)
    return pts


def save_pgm(image: DepthImage, path) -> None:
    """16-bit binary PGM, depth quantized to millimeters."""
    mm = np.clip(np.rint(image.depth * 1000.0), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n65535\n".encode("ascii"))
        fh.write(mm.tobytes())


def load_pgm(path) -> DepthImage:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ParseError("not a binary PGM file", 1, path)
    try:
        w, h = (int(x) for x in parts[1].split())
        maxval = int(parts[2])
    except ValueError:
        raise ParseError("bad PGM header", 2, path) from None
    if maxval != 65535:
        raise ParseError("expected 16-bit PGM", 3, path)
    raw = np.frombuffer(parts[3][: w * h * 2], dtype=">u2").reshape(h, w)
    return DepthImage(raw.astype(float) / 1000.0)
