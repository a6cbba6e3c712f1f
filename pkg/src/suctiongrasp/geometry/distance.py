"""Exact point-to-triangle-mesh distances."""
from __future__ import annotations

import numpy as np

from .types import TriangleMesh


def closest_points_on_triangles(p, a, b, c) -> np.ndarray:
    """Closest point on each triangle (a[i], b[i], c[i]) to the point p[i].

    Region-based closed form (vertex, edge or face region); all arguments are
    broadcast (N, 3) arrays.
    """
    p, a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (p, a, b, c)))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def take(mask, value):
        m = mask & ~done
        out[m] = value[m]
        done[m] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        take((d1 <= 0) & (d2 <= 0), a)
        take((d3 >= 0) & (d4 <= d3), b)
        take((d6 >= 0) & (d5 <= d6), c)
        v = d1 / (d1 - d3)
        take((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)
        w = d2 / (d2 - d6)
        take((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        take((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + w[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        take(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def point_mesh_distance(points, mesh: TriangleMesh, chunk: int = 2_000_000) -> np.ndarray:
    """Unsigned distance from each point to the nearest surface point of ``mesh``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    corners = mesh.corners
    nt = len(corners)
    best = np.full(len(pts), np.inf)
    step = max(1, chunk // max(nt, 1))
    for s in range(0, len(pts), step):
        q = pts[s:s + step]
        P = np.repeat(q, nt, axis=0)
        A = np.tile(corners[:, 0], (len(q), 1))
        B = np.tile(corners[:, 1], (len(q), 1))
        C = np.tile(corners[:, 2], (len(q), 1))
        cp = closest_points_on_triangles(P, A, B, C)
        d = np.linalg.norm(P - cp, axis=1).reshape(len(q), nt)
        best[s:s + step] = d.min(axis=1)
    return best
