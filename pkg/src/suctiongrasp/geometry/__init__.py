from .bvh import RayHit, SceneIndex, ray_cast
from .camera import depth_to_pointcloud, merge_views, project_points, render_depth
from .distance import point_mesh_distance
from .normals import estimate_normals
from .primitives import box_mesh, cylinder_mesh, grid_plane_mesh, sphere_mesh
from .sampling import farthest_point_sampling, sample_mesh_surface
from .spatial import PointIndex, ball_query
from .types import (
    GROUND_ID,
    CameraIntrinsics,
    PointCloud,
    Pose6D,
    SceneModel,
    SceneObject,
    TriangleMesh,
    look_at,
    orthonormal_completion,
    rotation_about_axis,
    unit,
)

__all__ = [
    "GROUND_ID", "CameraIntrinsics", "PointCloud", "PointIndex", "Pose6D", "RayHit",
    "SceneIndex", "SceneModel", "SceneObject", "TriangleMesh", "ball_query", "box_mesh",
    "cylinder_mesh", "depth_to_pointcloud", "estimate_normals", "farthest_point_sampling",
    "grid_plane_mesh", "look_at", "merge_views", "orthonormal_completion",
    "point_mesh_distance", "project_points", "ray_cast", "render_depth", "rotation_about_axis",
    "sample_mesh_surface", "sphere_mesh", "unit",
]
