"""Pinhole back-projection, depth rendering and multi-view fusion.

Camera frames follow the OpenCV convention (x right, y down, z forward);
extrinsics are camera-to-world poses.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .bvh import SceneIndex
from .types import CameraIntrinsics, PointCloud, Pose6D, unit


def depth_to_pointcloud(depth, intr: CameraIntrinsics, extrinsic: Optional[Pose6D] = None,
                        labels=None) -> PointCloud:
    """Back-project a metric depth image; zero-depth pixels are skipped."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (intr.height, intr.width):
        raise ValueError(f"depth shape {depth.shape} does not match intrinsics "
                         f"({intr.height}, {intr.width})")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != depth.shape:
            raise ValueError("label image shape does not match depth")
    if np.any(depth < 0) or not np.all(np.isfinite(depth)):
        raise ValueError("depth values must be finite and non-negative")
    v, u = np.nonzero(depth > 0)
    z = depth[v, u]
    cam = np.column_stack([(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z])
    pts = cam if extrinsic is None else extrinsic.apply(cam)
    return PointCloud(pts, None, None if labels is None else labels[v, u].astype(np.int64))


def project_points(points, intr: CameraIntrinsics, extrinsic: Optional[Pose6D] = None):
    """Project world points; returns pixel coordinates ``(u, v)`` and camera depth."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = p if extrinsic is None else extrinsic.inverse().apply(p)
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
    return u, v, z


def pixel_rays(intr: CameraIntrinsics, extrinsic: Pose6D):
    """World-frame unit ray directions through every pixel center, row-major,
    plus the per-pixel camera-z component of each direction."""
    v, u = np.mgrid[0:intr.height, 0:intr.width]
    d = np.column_stack([(u.ravel() - intr.cx) / intr.fx, (v.ravel() - intr.cy) / intr.fy,
                         np.ones(u.size)])
    d = unit(d)
    return extrinsic.apply_vectors(d), d[:, 2]


def render_depth(index: SceneIndex, intr: CameraIntrinsics, extrinsic: Pose6D,
                 max_range: float = 10.0):
    """Ray-cast a depth image (camera z, meters) and an instance label image.

    Pixels that see nothing get depth 0 and label 0.
    """
    dirs, zc = pixel_rays(intr, extrinsic)
    origins = np.broadcast_to(extrinsic.translation, dirs.shape)
    t, inst, _ = index.cast(origins, dirs, max_range)
    hit = np.isfinite(t)
    depth = np.where(hit, t * zc, 0.0).reshape(intr.height, intr.width)
    labels = np.where(hit, inst, 0).reshape(intr.height, intr.width).astype(np.int64)
    return depth, labels


def merge_views(clouds: Sequence[PointCloud], voxel: float = 0.002) -> PointCloud:
    """Concatenate clouds and keep one representative point per voxel.

    The representative is the point closest to the voxel center. Its label is
    the majority label in the voxel (smallest label on ties) and its normal the
    normalized mean of the voxel's normals. ``voxel == 0`` only concatenates.
    Output is ordered by voxel key.
    """
    clouds = list(clouds)
    if not clouds:
        raise ValueError("no clouds to merge")
    if voxel < 0:
        raise ValueError("voxel must be non-negative")
    has_n = all(c.normals is not None for c in clouds)
    has_l = all(c.labels is not None for c in clouds)
    pts = np.vstack([c.points for c in clouds])
    nrm = np.vstack([c.normals for c in clouds]) if has_n else None
    lab = np.concatenate([c.labels for c in clouds]) if has_l else None
    if voxel == 0 or len(pts) == 0:
        return PointCloud(pts, nrm, lab)

    keys = np.floor(pts / voxel).astype(np.int64)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    centers = (uniq + 0.5) * voxel
    d2 = ((pts - centers[inv]) ** 2).sum(axis=1)
    # per voxel: nearest point, ties to the lower input index
    order = np.lexsort((np.arange(len(pts)), d2, inv))
    first = np.ones(len(order), dtype=bool)
    first[1:] = inv[order[1:]] != inv[order[:-1]]
    rep = order[first]

    out_n = None
    if has_n:
        acc = np.zeros((len(uniq), 3))
        np.add.at(acc, inv, nrm)
        norm = np.linalg.norm(acc, axis=1)
        out_n = np.where(norm[:, None] > 1e-12, acc / np.maximum(norm, 1e-300)[:, None], nrm[rep])
    out_l = None
    if has_l:
        pair = np.column_stack([inv, lab])
        up, cnt = np.unique(pair, axis=0, return_counts=True)
        # sort by voxel, then count descending, then label ascending
        o = np.lexsort((up[:, 1], -cnt, up[:, 0]))
        up = up[o]
        f = np.ones(len(up), dtype=bool)
        f[1:] = up[1:, 0] != up[:-1, 0]
        out_l = up[f, 1]
    return PointCloud(pts[rep], out_n, out_l)
