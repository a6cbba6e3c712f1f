"""Bellows suction cup discretization and physical limits."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .geometry.types import Pose6D


@dataclass(frozen=True)
class CupModel:
    """Suction cup geometry and load limits.

    The cup face is discretized as ``num_rings`` concentric polygons of
    ``verts_per_ring`` vertices each. Ray origins stand ``rest_height`` behind
    the contact plane.
    """

    radius: float = 0.015
    rest_height: float = 0.020
    num_rings: int = 15
    verts_per_ring: int = 64
    deformation_threshold: float = 0.10
    force_limit: float = 20.0
    torque_limit: float = 0.3           # N*m, not a published value
    max_bend_angle: float = np.radians(30.0)  # not a published value

    def __post_init__(self):
        if not (self.radius > 0 and self.rest_height > 0):
            raise ValueError("radius and rest_height must be positive")
        if self.num_rings < 1 or self.verts_per_ring < 3:
            raise ValueError("need at least one ring of three vertices")
        if not 0 < self.deformation_threshold < 1:
            raise ValueError("deformation_threshold must lie in (0, 1)")
        if not self.force_limit > 0:
            raise ValueError("force_limit must be positive")
        if not self.torque_limit > 0:
            raise ValueError("torque_limit must be positive")
        if not 0 < self.max_bend_angle <= np.pi:
            raise ValueError("max_bend_angle must lie in (0, pi]")

    @property
    def n_vertices(self) -> int:
        return self.num_rings * self.verts_per_ring

    @property
    def spread_limit(self) -> float:
        """Largest tolerated hit-distance spread, in meters."""
        return self.deformation_threshold * self.rest_height

    @property
    def innermost_ring_radius(self) -> float:
        return self.radius / self.num_rings

    def with_overrides(self, **kw) -> "CupModel":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return asdict(self)


PRESETS = {
    "cup_15mm": CupModel(radius=0.015, rest_height=0.020, force_limit=20.0),
    "cup_25mm": CupModel(radius=0.025, rest_height=0.030, force_limit=30.0),
}


def preset(name: str) -> CupModel:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown cup preset {name!r}; choose from {sorted(PRESETS)}") from None


def local_vertices(cup: CupModel) -> np.ndarray:
    """(num_rings * verts_per_ring, 3) vertices in the cup frame, ring-major."""
    k = np.arange(1, cup.num_rings + 1)
    j = np.arange(cup.verts_per_ring)
    r = cup.radius * k / cup.num_rings
    th = 2 * np.pi * j / cup.verts_per_ring
    R, TH = np.meshgrid(r, th, indexing="ij")
    return np.column_stack([np.full(R.size, -cup.rest_height),
                            (R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])


def perimeter_local_vertices(cup: CupModel, n: int = 8) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.full(n, -cup.rest_height), cup.radius * np.cos(th),
                            cup.radius * np.sin(th)])


def cup_vertices(cup: CupModel, pose: Pose6D):
    """Ray origins and directions of the full cup model in world coordinates.

    ``pose`` is the cup frame (x = approach direction into the surface, origin
    at the contact point). Every ray points along the pose x-axis.
    """
    origins = pose.apply(local_vertices(cup))
    directions = np.broadcast_to(pose.rotation[:, 0], origins.shape).copy()
    return origins, directions


def perimeter_vertices(cup: CupModel, pose: Pose6D, n: int = 8):
    origins = pose.apply(perimeter_local_vertices(cup, n))
    return origins, np.broadcast_to(pose.rotation[:, 0], origins.shape).copy()
