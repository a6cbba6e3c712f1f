"""Farthest point sampling and area-uniform mesh surface sampling."""
from __future__ import annotations

import numpy as np

from .types import PointCloud, TriangleMesh


def farthest_point_sampling(cloud, k: int, seed_index: int = 0) -> np.ndarray:
    """Greedy max-min subset of ``k`` point indices starting at ``seed_index``.

    Each pick maximizes the distance to the already selected set; ties go to
    the lowest index.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    n = len(pts)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not 0 <= seed_index < n:
        raise ValueError(f"seed_index {seed_index} out of range")
    selected = np.empty(k, dtype=np.int64)
    selected[0] = seed_index
    d2 = ((pts - pts[seed_index]) ** 2).sum(axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(d2))  # argmax returns the first maximum
        selected[i] = nxt
        np.minimum(d2, ((pts - pts[nxt]) ** 2).sum(axis=1), out=d2)
    return selected


def sample_mesh_surface(mesh: TriangleMesh, n: int, rng_seed=0) -> PointCloud:
    """``n`` points distributed uniformly by area, with face normals."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(mesh) == 0:
        raise ValueError("empty mesh")
    rng = np.random.default_rng(rng_seed)
    areas = mesh.face_areas()
    cdf = np.cumsum(areas)
    face = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    face = np.minimum(face, len(areas) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    c = mesh.corners[face]
    pts = ((1 - r1)[:, None] * c[:, 0] + (r1 * (1 - r2))[:, None] * c[:, 1]
           + (r1 * r2)[:, None] * c[:, 2])
    return PointCloud(pts, mesh.face_normals()[face])
