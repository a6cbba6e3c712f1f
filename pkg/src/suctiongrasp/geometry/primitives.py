"""Closed triangle meshes for simple solids, centered at the origin."""
from __future__ import annotations

import numpy as np

from .types import TriangleMesh


def box_mesh(size) -> TriangleMesh:
    """Axis-aligned box with outward-facing triangles."""
    sx, sy, sz = (0.5 * float(s) for s in size)
    v = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])
    # vertex id = 4*ix + 2*iy + iz
    f = [
        [0, 1, 3], [0, 3, 2],      # -x
        [4, 6, 7], [4, 7, 5],      # +x
        [0, 4, 5], [0, 5, 1],      # -y
        [2, 3, 7], [2, 7, 6],      # +y
        [0, 2, 6], [0, 6, 4],      # -z
        [1, 5, 7], [1, 7, 3],      # +z
    ]
    return TriangleMesh(v, np.array(f))


def cylinder_mesh(radius: float, height: float, segments: int = 48) -> TriangleMesh:
    """Capped cylinder along z."""
    a = 2 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(a), radius * np.sin(a)])
    h = 0.5 * height
    v = np.vstack([np.column_stack([ring, np.full(segments, -h)]),
                   np.column_stack([ring, np.full(segments, h)]),
                   [[0, 0, -h], [0, 0, h]]])
    bc, tc = 2 * segments, 2 * segments + 1
    f = []
    for i in range(segments):
        j = (i + 1) % segments
        f += [[i, j, segments + j], [i, segments + j, segments + i]]
        f += [[bc, j, i], [tc, segments + i, segments + j]]
    return TriangleMesh(v, np.array(f))


def sphere_mesh(radius: float, n_lat: int = 24, n_lon: int = 48) -> TriangleMesh:
    """UV sphere."""
    lat = np.pi * np.arange(1, n_lat) / n_lat
    lon = 2 * np.pi * np.arange(n_lon) / n_lon
    la, lo = np.meshgrid(lat, lon, indexing="ij")
    body = np.column_stack([(np.sin(la) * np.cos(lo)).ravel(), (np.sin(la) * np.sin(lo)).ravel(),
                            np.cos(la).ravel()])
    v = np.vstack([[0, 0, 1], body, [0, 0, -1]]) * radius
    south = len(v) - 1

    def idx(i, j):
        return 1 + i * n_lon + (j % n_lon)

    f = []
    for j in range(n_lon):
        f.append([0, idx(0, j), idx(0, j + 1)])
        f.append([south, idx(n_lat - 2, j + 1), idx(n_lat - 2, j)])
    for i in range(n_lat - 2):
        for j in range(n_lon):
            f.append([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)])
            f.append([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)])
    return TriangleMesh(v, np.array(f))


def grid_plane_mesh(size_x: float, size_y: float, nx: int, ny: int, height_fn=None) -> TriangleMesh:
    """Open rectangular sheet on a regular grid, optionally displaced in z."""
    xs = np.linspace(-size_x / 2, size_x / 2, nx + 1)
    ys = np.linspace(-size_y / 2, size_y / 2, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = np.zeros_like(X) if height_fn is None else height_fn(X, Y)
    v = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    a = (i * (ny + 1) + j).ravel()
    b = a + (ny + 1)
    f = np.vstack([np.column_stack([a, b, b + 1]), np.column_stack([a, b + 1, a + 1])])
    return TriangleMesh(v, f)
