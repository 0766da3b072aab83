"""End-to-end pose estimation from an accumulated contact cloud.

Stages: ball-pivot a surface over the contacts, resample it densely,
render z-buffered depth images from viewpoints fanned around the
explorer's starting direction, back-project the visible pixels, and
register the merged cloud against the known model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..config import ReconConfig
from ..errors import RegistrationFailed
from ..geometry import RigidTransform, voxel_downsample, voxel_downsample_with_normals
from ..mesh import ContactCloud, TriMesh, sample_mesh_surface
from .bpa import ball_pivot_reconstruct, default_pivot_radii
from .camera import (
    CameraIntrinsics,
    backproject_depth,
    generate_viewpoints,
    render_depth,
    visibility_filter,
)
from .metrics import add_s, auc_add_s
from .register import PoseEstimate, RegistrationTarget, register_pose


def _cap_cloud(points, normals, limit):
    """Voxel-thin a cloud down to at most ``limit`` points."""
    if len(points) <= limit:
        return points, normals
    span = points.max(axis=0) - points.min(axis=0)
    cell = max(1e-6, float(span.max()) / 64.0)
    for _ in range(32):
        p, n = voxel_downsample_with_normals(points, normals, cell)
        if len(p) <= limit:
            return p, n
        cell *= 1.3
    return p, n


@dataclass
class PosePipeline:
    """Reusable pipeline bound to one model and one viewpoint anchor."""

    model: TriMesh
    start_position: np.ndarray
    center: np.ndarray
    cfg: ReconConfig

    def __post_init__(self):
        self.intrinsics = CameraIntrinsics(
            self.cfg.fx, self.cfg.fy, self.cfg.cx, self.cfg.cy,
            self.cfg.image_width, self.cfg.image_height,
        )
        self.target = RegistrationTarget(self.model, self.cfg.model_sample_points)
        self.viewpoints = generate_viewpoints(
            self.start_position, self.center, self.cfg.viewpoints, self.cfg.cap_half_angle
        )

    def reconstruct(self, cloud: ContactCloud) -> TriMesh:
        pts, nrm = _cap_cloud(cloud.points, cloud.normals, self.cfg.max_bpa_points)
        radii = default_pivot_radii(pts, self.cfg.bpa_radius_factors)
        return ball_pivot_reconstruct(pts, nrm, radii)

    def render_observations(self, surface: TriMesh, seed: int = 0):
        """Depth images of the reconstructed surface from every viewpoint."""
        dense_p, dense_n = sample_mesh_surface(surface, self.cfg.resample_points, seed)
        images = []
        merged = []
        for view in self.viewpoints:
            visible = visibility_filter(dense_p, dense_n, view)
            if len(visible) == 0:
                images.append(None)
                continue
            image = render_depth(visible, self.intrinsics, self.cfg.splat_radius)
            images.append(image)
            merged.append(backproject_depth(image, self.intrinsics, view))
        if not merged:
            raise RegistrationFailed("no viewpoint saw any visible point")
        return images, np.vstack(merged)

    def estimate(self, cloud: ContactCloud, seed: int = 0) -> PoseEstimate:
        surface = self.reconstruct(cloud)
        _, observed = self.render_observations(surface, seed)
        if len(observed) > self.cfg.max_register_points:
            span = observed.max(axis=0) - observed.min(axis=0)
            cell = max(1e-6, float(span.max()) / 64.0)
            for _ in range(32):
                thinned = voxel_downsample(observed, cell)
                if len(thinned) <= self.cfg.max_register_points:
                    break
                cell *= 1.3
            observed = thinned
        return register_pose(
            observed,
            self.target,
            max_iter=self.cfg.icp_max_iter,
            tol=self.cfg.icp_tol,
            trim=self.cfg.icp_trim,
            extra_rotations=self.cfg.extra_rotations,
        )

    def estimate_scored(
        self, cloud: ContactCloud, ground_truth: RigidTransform, seed: int = 0
    ) -> PoseEstimate:
        est = self.estimate(cloud, seed)
        return est.scored(
            add_s(est.transform, ground_truth, self.target.points),
            auc_add_s(est.transform, ground_truth, self.target.points, self.cfg.d_max),
        )

    def lightweight(self, resample, viewpoints, max_bpa, max_register) -> "PosePipeline":
        """Cheaper clone for inside-training pose feedback."""
        cfg = replace(
            self.cfg,
            resample_points=resample,
            viewpoints=viewpoints,
            max_bpa_points=max_bpa,
            max_register_points=max_register,
        )
        return PosePipeline(self.model, self.start_position, self.center, cfg)


def estimate_pose(
    cloud: ContactCloud,
    model: TriMesh,
    start_position,
    center,
    cfg: ReconConfig | None = None,
    ground_truth: RigidTransform | None = None,
    seed: int = 0,
) -> PoseEstimate:
    """One-shot pipeline run; scores against the ground truth if given."""
    pipeline = PosePipeline(
        model, np.asarray(start_position, float), np.asarray(center, float),
        cfg or ReconConfig(),
    )
    if ground_truth is None:
        return pipeline.estimate(cloud, seed)
    return pipeline.estimate_scored(cloud, ground_truth, seed)
