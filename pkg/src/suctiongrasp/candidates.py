"""Object-aware suction candidate generation.

Contact points come from farthest point sampling over each object's labeled
points. Each contact gets a Darboux frame from the eigendecomposition of the
summed normal outer products in its neighborhood: the dominant eigenvector is
the surface normal (first column), the weakest one the minor curvature axis
(third column).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .geometry.io import FormatError
from .geometry.sampling import farthest_point_sampling
from .geometry.spatial import PointIndex
from .geometry.types import GROUND_ID, PointCloud, Pose6D, orthonormal_completion

DEGENERATE_EIG_TOL = 1e-9


class InsufficientNeighborsError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    samples_per_object: int = 100
    frame_radius: float = 0.015
    min_neighbors: int = 3

    def __post_init__(self):
        if self.samples_per_object < 1:
            raise ValueError("samples_per_object must be >= 1")
        if not self.frame_radius > 0:
            raise ValueError("frame_radius must be > 0")
        if self.min_neighbors < 1:
            raise ValueError("min_neighbors must be >= 1")


@dataclass(frozen=True, eq=False)
class SuctionCandidate:
    """A 6D suction pose.

    The rotation columns are ``[v1 | v2 | v3]`` with ``v1`` the outward surface
    normal at the contact point; the translation is the contact point itself.
    The cup approaches along ``-v1``.
    """

    pose: Pose6D
    instance_id: int
    contact_index: int
    candidate_id: int = 0
    flags: tuple[str, ...] = field(default=())

    @property
    def contact(self) -> np.ndarray:
        return self.pose.translation

    @property
    def normal(self) -> np.ndarray:
        return self.pose.rotation[:, 0]

    def approach_pose(self) -> Pose6D:
        """Cup frame: x points into the surface (``-v1``), origin at the contact."""
        R = self.pose.rotation
        return Pose6D(np.column_stack([-R[:, 0], -R[:, 1], R[:, 2]]), self.pose.translation)

    def to_json(self) -> dict:
        d = {"candidate_id": self.candidate_id, "instance_id": self.instance_id,
             "contact_index": self.contact_index,
             "translation": [float(x) for x in self.pose.translation],
             "rotation": [float(x) for x in self.pose.rotation.ravel()]}
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SuctionCandidate":
        pose = Pose6D(np.reshape(d["rotation"], (3, 3)), d["translation"])
        return cls(pose, int(d["instance_id"]), int(d["contact_index"]),
                   int(d.get("candidate_id", 0)), tuple(d.get("flags", ())))

    def __repr__(self):
        return (f"SuctionCandidate(id={self.candidate_id}, instance={self.instance_id}, "
                f"contact={self.contact.round(4).tolist()})")


def _frames_from_neighbors(normals, point_normal, offsets):
    """Rotation for one contact given neighbor normals and positional offsets.

    Returns ``(R, degenerate)``.
    """
    N = normals.T @ normals
    w, V = np.linalg.eigh(N)
    if w[2] - w[0] <= DEGENERATE_EIG_TOL * max(1.0, abs(w[2])):
        return orthonormal_completion(point_normal), True
    v1 = V[:, 2]
    if v1 @ point_normal < 0:
        v1 = -v1
    v3 = V[:, 0] - (V[:, 0] @ v1) * v1
    v3 /= np.linalg.norm(v3)
    # eigenvector sign is arbitrary: orient v3 by the skew of the neighborhood
    # along it, which moves with the cloud under rigid motion
    m3 = np.sum((offsets @ v3) ** 3)
    if abs(m3) > 1e-18:
        if m3 < 0:
            v3 = -v3
    elif v3[int(np.argmax(np.abs(v3)))] < 0:
        v3 = -v3
    v2 = np.cross(v3, v1)
    return np.column_stack([v1, v2, v3]), False


def darboux_frames(cloud: PointCloud, point_indices, frame_radius: float,
                   index: Optional[PointIndex] = None, min_neighbors: int = 3,
                   strict: bool = True):
    """Frames for several contact points.

    Neighborhoods come from ``index`` (built over ``cloud`` when omitted), so
    callers can restrict them, e.g. to one object's points.

    Returns ``(rotations (K, 3, 3), degenerate (K,) bool, n_neighbors (K,))``.
    With ``strict`` a sparse neighborhood raises; otherwise the frame falls
    back to an orthonormal completion of the point normal and is flagged.
    """
    if cloud.normals is None:
        raise ValueError("cloud has no normals")
    index = index or PointIndex(cloud)
    idx = np.asarray(point_indices, dtype=np.int64).reshape(-1)
    nbrs = index.ball_query_many(cloud.points[idx], frame_radius)
    Rs = np.empty((len(idx), 3, 3))
    degenerate = np.zeros(len(idx), dtype=bool)
    counts = np.array([len(n) for n in nbrs], dtype=np.int64)
    for k, (i, nb) in enumerate(zip(idx, nbrs)):
        if len(nb) < min_neighbors:
            if strict:
                raise InsufficientNeighborsError(
                    f"point {i}: {len(nb)} neighbors within {frame_radius} m, need {min_neighbors}")
            Rs[k] = orthonormal_completion(cloud.normals[i])
            degenerate[k] = True
            continue
        Rs[k], degenerate[k] = _frames_from_neighbors(
            cloud.normals[nb], cloud.normals[i], cloud.points[nb] - cloud.points[i])
    return Rs, degenerate, counts


def darboux_frame(cloud: PointCloud, point_index: int, frame_radius: float,
                  index: Optional[PointIndex] = None, min_neighbors: int = 3) -> np.ndarray:
    """3x3 rotation ``[v1 | v2 | v3]`` at one point."""
    Rs, _, _ = darboux_frames(cloud, [point_index], frame_radius, index, min_neighbors)
    return Rs[0]


def generate_candidates(scene_cloud: PointCloud, config: SamplerConfig = SamplerConfig()
                        ) -> list[SuctionCandidate]:
    """FPS contacts and Darboux frames for every labeled object (label > 0).

    Objects are visited in ascending instance id; candidate ids are assigned
    sequentially in that order. Frames use only the object's own points.
    """
    if scene_cloud.labels is None or scene_cloud.normals is None:
        raise ValueError("cloud must carry instance labels and normals")
    out: list[SuctionCandidate] = []
    for inst in np.unique(scene_cloud.labels):
        if inst == GROUND_ID:
            continue
        members = np.flatnonzero(scene_cloud.labels == inst)
        obj = scene_cloud.subset(members)
        k = min(config.samples_per_object, len(members))
        picks = farthest_point_sampling(obj, k, 0)
        Rs, degenerate, _ = darboux_frames(obj, picks, config.frame_radius, PointIndex(obj),
                                           config.min_neighbors, strict=False)
        clamped = len(members) < config.samples_per_object
        for local, R, deg in zip(picks, Rs, degenerate):
            flags = tuple(f for f, on in (("clamped", clamped), ("degenerate_frame", deg)) if on)
            out.append(SuctionCandidate(Pose6D(R, obj.points[local]), int(inst),
                                        int(members[local]), len(out), flags))
    return out


def write_candidates(path, candidates: Iterable[SuctionCandidate]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for c in candidates:
            fh.write(json.dumps(c.to_json()) + "\n")


def read_candidates(path) -> list[SuctionCandidate]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{where}: invalid JSON ({exc})") from exc
        for key in ("instance_id", "contact_index", "translation", "rotation"):
            if key not in d:
                raise FormatError(f"{where}.{key}: missing")
        try:
            out.append(SuctionCandidate.from_json(d))
        except (ValueError, TypeError) as exc:
            raise FormatError(f"{where}.rotation: {exc}") from exc
    return out
