"""Pose and coverage metrics: symmetric average distance, its area under
the accuracy curve, and voxel-overlap surface coverage."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import RigidTransform, voxel_indices
from ..mesh import TriMesh, sample_mesh_surface


def add_s_distances(estimate: RigidTransform, ground_truth: RigidTransform,
                    model_points) -> np.ndarray:
    """Closest-point distance per model point between the two posings."""
    pts = np.asarray(model_points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("model sample must be non-empty")
    est = estimate.apply(pts)
    gt = ground_truth.apply(pts)
    d, _ = cKDTree(gt).query(est, k=1)
    return d


def add_s(estimate: RigidTransform, ground_truth: RigidTransform, model_points) -> float:
    """Mean closest-point distance (symmetric-aware average distance)."""
    return float(add_s_distances(estimate, ground_truth, model_points).mean())


def auc_add_s(
    estimate: RigidTransform,
    ground_truth: RigidTransform,
    model_points,
    d_max: float = 0.1,
) -> float:
    """Area under the accuracy-vs-threshold curve, normalized to [0, 1].

    Accuracy(tau) is the fraction of model points whose closest-point
    distance is below tau; integrating over tau in [0, d_max] gives
    mean(max(0, 1 - d/d_max)) exactly.
    """
    if d_max <= 0.0:
        raise ValueError("d_max must be positive")
    d = add_s_distances(estimate, ground_truth, model_points)
    return float(np.clip(1.0 - d / d_max, 0.0, 1.0).mean())


def coverage_iou(contact_points, surface_points, cell: float) -> float:
    """Intersection over union of the occupied voxel sets of two clouds."""
    if cell <= 0.0:
        raise ValueError("cell size must be positive")
    a = np.asarray(contact_points, dtype=float).reshape(-1, 3)
    b = np.asarray(surface_points, dtype=float).reshape(-1, 3)
    cells_a = {tuple(c) for c in voxel_indices(a, cell)} if len(a) else set()
    cells_b = {tuple(c) for c in voxel_indices(b, cell)} if len(b) else set()
    union = cells_a | cells_b
    if not union:
        return 0.0
    return len(cells_a & cells_b) / len(union)


def coverage_iou_mesh(
    contact_points,
    mesh: TriMesh,
    pose: RigidTransform,
    cell: float = 0.01,
    samples: int = 4000,
    seed: int = 0,
) -> float:
    """Coverage of the posed object surface by the contact cloud."""
    surf, _ = sample_mesh_surface(mesh, samples, seed)
    return coverage_iou(contact_points, pose.apply(surf), cell)
