"""Tactile-only object pose estimation toolkit.

A simulated sensor-equipped hand explores rigid meshes, accumulates a
contact point cloud, and estimates the object's 6D pose by surface
reconstruction, multi-view depth rendering, and model-based registration.
"""

__version__ = "0.1.0"

from .geometry import Plane, RigidTransform, ray_plane_intersection, voxel_downsample
from .mesh import ContactCloud, TriMesh, closest_point_on_mesh, sample_mesh_surface

__all__ = [
    "Plane",
    "RigidTransform",
    "ray_plane_intersection",
    "voxel_downsample",
    "ContactCloud",
    "TriMesh",
    "closest_point_on_mesh",
    "sample_mesh_surface",
    "__version__",
]
