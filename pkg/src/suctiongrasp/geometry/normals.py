"""Surface normal estimation by local plane fitting."""
from __future__ import annotations

import numpy as np

from .spatial import PointIndex
from .types import PointCloud


def estimate_normals(cloud: PointCloud, k: int = 20, viewpoint=(0.0, 0.0, 1.0),
                     index: PointIndex | None = None) -> PointCloud:
    """Fit a plane to each point's ``k`` nearest neighbors.

    The normal is the eigenvector of the neighborhood covariance with the
    smallest eigenvalue, flipped to face ``viewpoint``. ``viewpoint`` may be a
    single position or an (M, 3) array of camera positions, in which case each
    normal faces the nearest one.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    n = len(cloud)
    if n < k:
        raise ValueError(f"too few points: {n} < k={k}")
    index = index or PointIndex(cloud)
    _, nbr = index.knn(cloud.points, k)
    nb = cloud.points[nbr]                                  # (N, k, 3)
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]

    vp = np.asarray(viewpoint, dtype=np.float64).reshape(-1, 3)
    if len(vp) == 1:
        to_view = vp[0] - cloud.points
    else:
        d2 = ((cloud.points[:, None, :] - vp[None, :, :]) ** 2).sum(axis=2)
        to_view = vp[np.argmin(d2, axis=1)] - cloud.points
    flip = np.einsum("ij,ij->i", normals, to_view) < 0
    normals[flip] *= -1
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return cloud.with_normals(normals)
