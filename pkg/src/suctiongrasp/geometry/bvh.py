"""Bounding-volume hierarchy over scene triangles and batched ray casting.

The hierarchy uses median splits on the widest centroid axis with small
leaves. Traversal is compiled with numba and releases the GIL, so callers can
fan candidate batches out over threads. Nearest-hit ties are broken by the
lowest global triangle index; an exact tie between an object triangle and the
ground plane reports the object.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from .types import GROUND_ID, SceneModel, TriangleMesh

LEAF_SIZE = 4
_STACK = 64
DET_EPS = 1e-18
# barycentric slack so rays along a shared edge cannot slip between triangles
EDGE_EPS = 1e-9
BOX_PAD = 1e-9

_jit = nb.njit(cache=True, nogil=True, error_model="numpy")


@_jit
def _build(centroids, tri_min, tri_max, leaf_size):
    n = centroids.shape[0]
    order = np.arange(n)
    max_nodes = 2 * n + 1
    bmin = np.empty((max_nodes, 3))
    bmax = np.empty((max_nodes, 3))
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    start = np.zeros(max_nodes, np.int64)
    count = np.zeros(max_nodes, np.int64)

    stack_node = np.empty(max_nodes, np.int64)
    sp = 0
    n_nodes = 1
    start[0] = 0
    count[0] = n
    stack_node[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        s = start[node]
        c = count[node]
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        clo = np.full(3, np.inf)
        chi = np.full(3, -np.inf)
        for i in range(s, s + c):
            t = order[i]
            for a in range(3):
                if tri_min[t, a] < lo[a]:
                    lo[a] = tri_min[t, a]
                if tri_max[t, a] > hi[a]:
                    hi[a] = tri_max[t, a]
                if centroids[t, a] < clo[a]:
                    clo[a] = centroids[t, a]
                if centroids[t, a] > chi[a]:
                    chi[a] = centroids[t, a]
        for a in range(3):
            bmin[node, a] = lo[a] - BOX_PAD
            bmax[node, a] = hi[a] + BOX_PAD
        if c <= leaf_size:
            continue
        axis = 0
        ext = chi[0] - clo[0]
        for a in range(1, 3):
            if chi[a] - clo[a] > ext:
                ext = chi[a] - clo[a]
                axis = a
        if ext <= 0.0:
            continue
        seg = order[s:s + c].copy()
        keys = np.empty(c)
        for i in range(c):
            keys[i] = centroids[seg[i], axis]
        perm = np.argsort(keys, kind="mergesort")
        for i in range(c):
            order[s + i] = seg[perm[i]]
        half = c // 2
        l = n_nodes
        r = n_nodes + 1
        n_nodes += 2
        left[node] = l
        right[node] = r
        start[l] = s
        count[l] = half
        start[r] = s + half
        count[r] = c - half
        count[node] = 0
        stack_node[sp] = r
        sp += 1
        stack_node[sp] = l
        sp += 1
    return (order, bmin[:n_nodes].copy(), bmax[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy())


@_jit
def _slab(o, inv, lo, hi, tmax):
    t0 = 0.0
    t1 = tmax
    for a in range(3):
        ta = (lo[a] - o[a]) * inv[a]
        tb = (hi[a] - o[a]) * inv[a]
        if ta > tb:
            ta, tb = tb, ta
        # NaN arises for 0 * inf; treat the slab as unbounded on that axis
        if ta == ta and ta > t0:
            t0 = ta
        if tb == tb and tb < t1:
            t1 = tb
        if t0 > t1:
            return np.inf
    return t0


@_jit
def _trace(origins, dirs, tmax, exclude, bmin, bmax, left, right, start, count,
           v0, e1, e2, tri_id, tri_inst, out_t, out_tri):
    n = origins.shape[0]
    stack = np.empty(_STACK, np.int64)
    inv = np.empty(3)
    for r in range(n):
        o = origins[r]
        d = dirs[r]
        for a in range(3):
            inv[a] = 1.0 / d[a]
        best_t = tmax[r]
        best_tri = -1
        ex = exclude[r]
        sp = 0
        if _slab(o, inv, bmin[0], bmax[0], best_t) <= best_t:
            stack[sp] = 0
            sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    if tri_inst[k] == ex:
                        continue
                    px = d[1] * e2[k, 2] - d[2] * e2[k, 1]
                    py = d[2] * e2[k, 0] - d[0] * e2[k, 2]
                    pz = d[0] * e2[k, 1] - d[1] * e2[k, 0]
                    det = e1[k, 0] * px + e1[k, 1] * py + e1[k, 2] * pz
                    if abs(det) < DET_EPS:
                        continue
                    invdet = 1.0 / det
                    sx = o[0] - v0[k, 0]
                    sy = o[1] - v0[k, 1]
                    sz = o[2] - v0[k, 2]
                    u = (sx * px + sy * py + sz * pz) * invdet
                    if u < -EDGE_EPS or u > 1.0 + EDGE_EPS:
                        continue
                    qx = sy * e1[k, 2] - sz * e1[k, 1]
                    qy = sz * e1[k, 0] - sx * e1[k, 2]
                    qz = sx * e1[k, 1] - sy * e1[k, 0]
                    v = (d[0] * qx + d[1] * qy + d[2] * qz) * invdet
                    if v < -EDGE_EPS or u + v > 1.0 + EDGE_EPS:
                        continue
                    t = (e2[k, 0] * qx + e2[k, 1] * qy + e2[k, 2] * qz) * invdet
                    if t < 0.0:
                        continue
                    if t < best_t or (t == best_t and (best_tri < 0 or tri_id[k] < best_tri)):
                        best_t = t
                        best_tri = tri_id[k]
            else:
                l = left[node]
                rr = right[node]
                tl = _slab(o, inv, bmin[l], bmax[l], best_t)
                tr = _slab(o, inv, bmin[rr], bmax[rr], best_t)
                # push the farther child first so the nearer one pops next
                if tl <= tr:
                    if tr <= best_t:
                        stack[sp] = rr
                        sp += 1
                    if tl <= best_t:
                        stack[sp] = l
                        sp += 1
                else:
                    if tl <= best_t:
                        stack[sp] = l
                        sp += 1
                    if tr <= best_t:
                        stack[sp] = rr
                        sp += 1
        out_t[r] = best_t if best_tri >= 0 else np.inf
        out_tri[r] = best_tri


@dataclass(frozen=True)
class RayHit:
    distance: float
    instance_id: int
    triangle_index: int  # -1 for the ground plane


class SceneIndex:
    """Ray-casting acceleration structure over a :class:`SceneModel`.

    Triangles of all objects are placed in world coordinates and concatenated
    in scene order; ``triangle_index`` refers to that concatenation.
    """

    def __init__(self, scene: SceneModel, leaf_size: int = LEAF_SIZE):
        self.scene = scene
        self.ground_plane = bool(scene.ground_plane)
        meshes, inst = [], []
        for obj in scene.objects:
            m = obj.world_mesh()
            meshes.append(m)
            inst.append(np.full(len(m), obj.instance_id, dtype=np.int64))
        self.mesh = TriangleMesh.concatenate(meshes)
        self.triangle_instance = np.concatenate(inst) if inst else np.zeros(0, dtype=np.int64)
        corners = self.mesh.corners
        n = len(corners)
        if n:
            order, self._bmin, self._bmax, self._left, self._right, self._start, self._count = _build(
                corners.mean(axis=1), corners.min(axis=1), corners.max(axis=1), leaf_size)
        else:
            order = np.zeros(0, dtype=np.int64)
            self._bmin = np.full((1, 3), np.inf)
            self._bmax = np.full((1, 3), -np.inf)
            self._left = self._right = np.full(1, -1, dtype=np.int64)
            self._start = np.zeros(1, dtype=np.int64)
            self._count = np.zeros(1, dtype=np.int64)
        c = corners[order]
        self._v0 = np.ascontiguousarray(c[:, 0])
        self._e1 = np.ascontiguousarray(c[:, 1] - c[:, 0])
        self._e2 = np.ascontiguousarray(c[:, 2] - c[:, 0])
        self._tri_id = np.ascontiguousarray(order.astype(np.int64))
        self._tri_inst = np.ascontiguousarray(self.triangle_instance[order])

    @property
    def n_triangles(self) -> int:
        return len(self.mesh)

    @property
    def n_nodes(self) -> int:
        return len(self._count)

    def cast(self, origins, directions, max_dist, exclude=None):
        """Cast a batch of rays.

        Parameters
        ----------
        origins, directions : (N, 3) arrays; directions must be unit length.
        max_dist : float or (N,) array
        exclude : optional int or (N,) array of instance ids to ignore per ray
            (-1 ignores nothing; 0 ignores the ground plane).

        Returns
        -------
        distance : (N,) float, ``inf`` on a miss
        instance : (N,) int, -1 on a miss
        triangle : (N,) int, -1 on a miss or a ground hit
        """
        o = np.ascontiguousarray(np.asarray(origins, dtype=np.float64).reshape(-1, 3))
        d = np.ascontiguousarray(np.asarray(directions, dtype=np.float64).reshape(-1, 3))
        n = len(o)
        if d.shape != o.shape:
            raise ValueError("origins and directions differ in shape")
        tmax = np.ascontiguousarray(np.broadcast_to(np.asarray(max_dist, dtype=np.float64), (n,)))
        if np.any(tmax <= 0):
            raise ValueError("max_dist must be positive")
        if exclude is None:
            ex = np.full(n, -1, dtype=np.int64)
        else:
            ex = np.ascontiguousarray(np.broadcast_to(np.asarray(exclude, dtype=np.int64), (n,)))
        t = np.full(n, np.inf)
        tri = np.full(n, -1, dtype=np.int64)
        inst = np.full(n, -1, dtype=np.int64)
        if self.n_triangles:
            _trace(o, d, tmax, ex, self._bmin, self._bmax, self._left, self._right, self._start,
                   self._count, self._v0, self._e1, self._e2, self._tri_id, self._tri_inst, t, tri)
            inst = np.where(tri >= 0, self.triangle_instance[np.maximum(tri, 0)], -1)
        if self.ground_plane:
            with np.errstate(divide="ignore", invalid="ignore"):
                tg = -o[:, 2] / d[:, 2]
            ok = (d[:, 2] != 0) & (tg >= 0) & (tg <= tmax) & (tg < t) & (ex != GROUND_ID)
            t = np.where(ok, tg, t)
            inst = np.where(ok, GROUND_ID, inst)
            tri = np.where(ok, -1, tri)
        return t, inst.astype(np.int64), tri

    def ray_cast(self, origin, direction, max_dist: float, exclude: Optional[int] = None) -> Optional[RayHit]:
        """Nearest hit along a single ray, or ``None``."""
        t, inst, tri = self.cast(np.reshape(origin, (1, 3)), np.reshape(direction, (1, 3)),
                                 max_dist, exclude)
        if not np.isfinite(t[0]):
            return None
        return RayHit(float(t[0]), int(inst[0]), int(tri[0]))


def ray_cast(index: SceneIndex, origin, direction, max_dist: float) -> Optional[RayHit]:
    return index.ray_cast(origin, direction, max_dist)
