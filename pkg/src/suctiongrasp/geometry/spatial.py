"""Point-cloud spatial index: ball and k-nearest-neighbor queries."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .types import PointCloud


class PointIndex:
    """KD-tree over a point cloud.

    Build once, query from any number of threads. Ball queries return sorted
    index arrays so downstream results never depend on tree internals.
    """

    def __init__(self, cloud_or_points):
        pts = cloud_or_points.points if isinstance(cloud_or_points, PointCloud) else cloud_or_points
        self.points = np.asarray(pts, dtype=np.float64)
        self._tree = cKDTree(self.points, balanced_tree=True, compact_nodes=True)

    def __len__(self) -> int:
        return len(self.points)

    def ball_query(self, center, radius: float) -> np.ndarray:
        """Indices of all points with ``|p - center| <= radius``."""
        if not radius > 0:
            raise ValueError("radius must be positive")
        idx = self._tree.query_ball_point(np.asarray(center, dtype=np.float64), radius)
        return np.array(sorted(idx), dtype=np.int64)

    def ball_query_many(self, centers, radius: float) -> list[np.ndarray]:
        if not radius > 0:
            raise ValueError("radius must be positive")
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        lists = self._tree.query_ball_point(centers, radius, return_sorted=True)
        return [np.asarray(l, dtype=np.int64) for l in lists]

    def ball_query_pairs(self, centers, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ball query: ``(query_index, point_index)`` pairs, grouped by query."""
        res = self.ball_query_many(centers, radius)
        counts = np.array([len(r) for r in res], dtype=np.int64)
        q = np.repeat(np.arange(len(res), dtype=np.int64), counts)
        p = np.concatenate(res) if res else np.zeros(0, dtype=np.int64)
        return q, p.astype(np.int64)

    def knn(self, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Distances and indices of the ``k`` nearest points, nearest first."""
        if k < 1 or k > len(self.points):
            raise ValueError(f"k must lie in [1, {len(self.points)}]")
        q = np.asarray(queries, dtype=np.float64)
        d, i = self._tree.query(q, k=k)
        if k == 1:
            d, i = d[..., None], i[..., None]
        return d, i.astype(np.int64)

    def nearest(self, queries) -> tuple[np.ndarray, np.ndarray]:
        d, i = self._tree.query(np.asarray(queries, dtype=np.float64), k=1)
        return d, np.asarray(i, dtype=np.int64)


def ball_query(index: PointIndex, center, radius: float) -> np.ndarray:
    return index.ball_query(center, radius)
