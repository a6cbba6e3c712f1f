"""Core value types: poses, point clouds, triangle meshes, scenes and cameras.

All arrays are float64 in meters unless noted. Instances validate on
construction and are treated as immutable afterwards (the arrays are marked
read-only).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-6
UNIT_TOL = 1e-6
GROUND_ID = 0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _as_points(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1 and a.size == 0:
        a = a.reshape(0, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {a.shape}")
    return a


def unit(v) -> np.ndarray:
    """Normalize a vector (or rows of vectors)."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def orthonormal_completion(n) -> np.ndarray:
    """Right-handed rotation whose first column is the unit vector ``n``."""
    n = unit(n)
    # pick the world axis least aligned with n
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    b = unit(np.cross(n, helper))
    c = np.cross(n, b)
    return np.column_stack([n, b, c])


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = unit(axis)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True, eq=False)
class Pose6D:
    """Rigid transform ``x_world = rotation @ x_local + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> "Pose6D":
        return cls()

    @classmethod
    def from_matrix(cls, T) -> "Pose6D":
        T = np.asarray(T, dtype=np.float64)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, points) -> np.ndarray:
        """Transform points of shape (3,) or (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def apply_vectors(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def inverse(self) -> "Pose6D":
        Rt = self.rotation.T
        return Pose6D(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "Pose6D") -> "Pose6D":
        return Pose6D(self.rotation @ other.rotation,
                      self.rotation @ other.translation + self.translation)

    def __eq__(self, other):
        if not isinstance(other, Pose6D):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    def __repr__(self):
        return f"Pose6D(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points with optional unit normals and per-point instance labels.

    Label 0 is reserved for the ground plane.
    """

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = _as_points(self.points, "points")
        object.__setattr__(self, "points", _frozen(pts))
        n = len(pts)
        if self.normals is not None:
            nrm = _as_points(self.normals, "normals")
            if len(nrm) != n:
                raise ValueError("normals length differs from points length")
            if n and np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > UNIT_TOL:
                raise ValueError("normals must be unit length")
            object.__setattr__(self, "normals", _frozen(nrm))
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (n,):
                raise ValueError("labels length differs from points length")
            if n and (not np.issubdtype(lab.dtype, np.integer) and not np.all(lab == np.round(lab))):
                raise ValueError("labels must be integers")
            lab = lab.astype(np.int64)
            if n and lab.min() < 0:
                raise ValueError("labels must be non-negative")
            object.__setattr__(self, "labels", _frozen(lab))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def subset(self, indices) -> "PointCloud":
        idx = np.asarray(indices, dtype=np.int64)
        return PointCloud(
            self.points[idx],
            None if self.normals is None else self.normals[idx],
            None if self.labels is None else self.labels[idx],
        )

    def with_normals(self, normals) -> "PointCloud":
        return PointCloud(self.points, normals, self.labels)

    def with_labels(self, labels) -> "PointCloud":
        return PointCloud(self.points, self.normals, labels)

    def transformed(self, pose: Pose6D) -> "PointCloud":
        return PointCloud(
            pose.apply(self.points),
            None if self.normals is None else pose.apply_vectors(self.normals),
            self.labels,
        )

    def instance_ids(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.labels)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = _as_points(self.vertices, "vertices")
        f = np.asarray(self.triangles)
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"triangles must have shape (F, 3), got {f.shape}")
        f = f.astype(np.int64)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "triangles", _frozen(f))

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def corners(self) -> np.ndarray:
        """(F, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def face_cross(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        cr = self.face_cross()
        return cr / np.linalg.norm(cr, axis=1, keepdims=True)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def centroid(self) -> np.ndarray:
        """Center of mass for uniform density.

        Uses the signed-tetrahedron volume integral; falls back to the
        area-weighted surface centroid for open or flat meshes.
        """
        c = self.corners
        vol6 = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2]))
        total = vol6.sum()
        scale = max(np.ptp(self.vertices, axis=0).max(), 1e-12)
        if abs(total) > 1e-9 * scale ** 3:
            return (vol6[:, None] * c.sum(axis=1)).sum(axis=0) / (4.0 * total)
        a = self.face_areas()
        return (a[:, None] * c.mean(axis=1)).sum(axis=0) / a.sum()

    def transformed(self, pose: Pose6D) -> "TriangleMesh":
        return TriangleMesh(pose.apply(self.vertices), self.triangles)

    def scaled(self, factor: float) -> "TriangleMesh":
        return TriangleMesh(self.vertices * factor, self.triangles)

    def cleaned(self, area_eps: float = 1e-14) -> tuple["TriangleMesh", int]:
        """Drop zero-area and repeated-index triangles.

        Returns the cleaned mesh and the number of dropped faces.
        """
        f = self.triangles
        if len(f) == 0:
            return self, 0
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        keep = ~repeated & (self.face_areas() > area_eps)
        dropped = int(len(f) - keep.sum())
        if dropped:
            logger.warning("dropped %d degenerate triangle(s)", dropped)
            return TriangleMesh(self.vertices, f[keep]), dropped
        return self, 0

    @staticmethod
    def concatenate(meshes: Sequence["TriangleMesh"]) -> "TriangleMesh":
        verts, tris, off = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            tris.append(m.triangles + off)
            off += len(m.vertices)
        if not verts:
            return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        return TriangleMesh(np.vstack(verts), np.vstack(tris))


@dataclass(frozen=True, eq=False)
class SceneObject:
    instance_id: int
    mesh: TriangleMesh
    pose: Pose6D = field(default_factory=Pose6D)
    mass: float = 1.0
    friction: float = 0.5
    mesh_path: Optional[str] = None

    def __post_init__(self):
        if int(self.instance_id) != self.instance_id or self.instance_id <= 0:
            raise ValueError(f"instance_id must be a positive integer, got {self.instance_id}")
        if not self.mass > 0:
            raise ValueError(f"object {self.instance_id}: mass must be > 0")
        if not 0.0 <= self.friction <= 1.0:
            raise ValueError(f"object {self.instance_id}: friction must lie in [0, 1]")
        if len(self.mesh) == 0:
            raise ValueError(f"object {self.instance_id}: empty mesh")

    def world_mesh(self) -> TriangleMesh:
        return self.mesh.transformed(self.pose)

    def center_of_mass(self) -> np.ndarray:
        return self.pose.apply(self.mesh.centroid())


@dataclass(frozen=True, eq=False)
class SceneModel:
    """Object set plus an optional ground plane at z = 0 (instance 0)."""

    objects: tuple[SceneObject, ...] = ()
    ground_plane: bool = True

    def __post_init__(self):
        objs = tuple(self.objects)
        ids = [o.instance_id for o in objs]
        if len(set(ids)) != len(ids):
            raise ValueError("instance ids must be unique")
        object.__setattr__(self, "objects", objs)

    def __len__(self) -> int:
        return len(self.objects)

    def ids(self) -> list[int]:
        return [o.instance_id for o in self.objects]

    def get(self, instance_id: int) -> SceneObject:
        for o in self.objects:
            if o.instance_id == instance_id:
                return o
        raise KeyError(f"unknown instance id {instance_id}")

    def transformed(self, pose: Pose6D) -> "SceneModel":
        """Apply a rigid motion to every object (the ground plane is dropped
        unless the motion keeps it fixed)."""
        keeps_ground = (np.allclose(pose.rotation[:, 2], [0, 0, 1])
                        and abs(pose.translation[2]) < 1e-12)
        return SceneModel(
            tuple(SceneObject(o.instance_id, o.mesh, pose @ o.pose, o.mass, o.friction, o.mesh_path)
                  for o in self.objects),
            self.ground_plane and keeps_ground,
        )


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float) -> "CameraIntrinsics":
        fx = 0.5 * width / np.tan(np.radians(hfov_deg) / 2)
        return cls(fx, fx, (width - 1) / 2, (height - 1) / 2, width, height)


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose6D:
    """Camera-to-world pose for an OpenCV camera (x right, y down, z forward)."""
    eye = np.asarray(eye, dtype=np.float64)
    z = unit(np.asarray(target, dtype=np.float64) - eye)
    up = np.asarray(up, dtype=np.float64)
    if abs(np.dot(z, unit(up))) > 0.999:
        up = np.array([0.0, 1.0, 0.0])
    x = unit(np.cross(z, up))
    y = np.cross(z, x)
    return Pose6D(np.column_stack([x, y, z]), eye)
