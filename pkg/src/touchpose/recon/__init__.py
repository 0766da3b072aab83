"""Surface reconstruction, depth rendering, registration, and metrics."""

from .bpa import ball_pivot_reconstruct, default_pivot_radii, mean_spacing
from .camera import (
    CameraIntrinsics,
    DepthImage,
    backproject_depth,
    generate_viewpoints,
    render_depth,
    visibility_filter,
)
from .metrics import add_s, auc_add_s, coverage_iou, coverage_iou_mesh
from .pipeline import PosePipeline, estimate_pose
from .register import PoseEstimate, RegistrationTarget, register_pose

__all__ = [
    "ball_pivot_reconstruct",
    "default_pivot_radii",
    "mean_spacing",
    "CameraIntrinsics",
    "DepthImage",
    "generate_viewpoints",
    "visibility_filter",
    "render_depth",
    "backproject_depth",
    "add_s",
    "auc_add_s",
    "coverage_iou",
    "coverage_iou_mesh",
    "PoseEstimate",
    "RegistrationTarget",
    "register_pose",
    "PosePipeline",
    "estimate_pose",
]
