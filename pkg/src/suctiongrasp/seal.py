"""Seal formation and approach-collision gates by dense ray casting.

Seal: every cup vertex casts a ray along the approach axis. The seal holds
when all rays hit the target object and the spread of hit distances stays
within ``deformation_threshold * rest_height``.

Collision: the cup's bounding cylinder (plus a skin) swept back along the
surface normal must be free of other instances.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .candidates import SuctionCandidate
from .cup import CupModel, local_vertices, perimeter_local_vertices
from .geometry.bvh import SceneIndex
from .geometry.types import GROUND_ID


@dataclass(frozen=True)
class CollisionParams:
    skin: float = 0.002
    retreat: float = 0.10
    axial_rings: int = 3
    axial_per_ring: int = 32
    radial_levels: int = 12
    radial_dirs: int = 16

    def __post_init__(self):
        if self.skin < 0 or not self.retreat > 0:
            raise ValueError("skin must be >= 0 and retreat > 0")


@dataclass(frozen=True, eq=False)
class SealResult:
    passed: bool
    hit_count: int
    n_rays: int
    spread: float
    max_deformation: float
    foreign_hits: int
    distances: Optional[np.ndarray] = field(default=None, repr=False)
    instances: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class CollisionResult:
    passed: bool
    blocking_instance: Optional[int]
    clearance: float


def _cup_frames(cands: Sequence[SuctionCandidate]):
    R = np.stack([c.approach_pose().rotation for c in cands]) if cands else np.zeros((0, 3, 3))
    T = np.stack([c.contact for c in cands]) if cands else np.zeros((0, 3))
    return R, T


def _seal_from_local(index: SceneIndex, cup: CupModel, cands, local, check_foreign: bool,
                     spread_limit: float, keep_rays: bool) -> list[SealResult]:
    R, T = _cup_frames(cands)
    k, m = len(cands), len(local)
    if k == 0:
        return []
    origins = np.einsum("kij,vj->kvi", R, local) + T[:, None, :]
    dirs = np.broadcast_to(R[:, None, :, 0], (k, m, 3))
    t, inst, _ = index.cast(origins.reshape(-1, 3), dirs.reshape(-1, 3), 2.0 * cup.rest_height)
    t = t.reshape(k, m)
    inst = inst.reshape(k, m)
    out = []
    for i, c in enumerate(cands):
        ti, ii = t[i], inst[i]
        hit = np.isfinite(ti)
        hit_count = int(hit.sum())
        foreign = int(np.sum(hit & (ii != c.instance_id))) if check_foreign else 0
        if hit_count:
            th = ti[hit]
            spread = float(th.max() - th.min())
            max_def = float(np.abs(th - cup.rest_height).max())
        else:
            spread = max_def = float("inf")
        passed = hit_count == m and foreign == 0 and spread <= spread_limit
        out.append(SealResult(passed, hit_count, m, spread, max_def, foreign,
                              ti.copy() if keep_rays else None, ii.copy() if keep_rays else None))
    return out


def evaluate_seal_batch(index: SceneIndex, cup: CupModel, cands: Sequence[SuctionCandidate],
                        keep_rays: bool = False, threshold: Optional[float] = None) -> list[SealResult]:
    """Full-resolution seal check for many candidates in one ray batch.

    ``threshold`` overrides the cup's deformation threshold (fraction of the
    rest height).
    """
    frac = cup.deformation_threshold if threshold is None else threshold
    return _seal_from_local(index, cup, cands, local_vertices(cup), True,
                            frac * cup.rest_height, keep_rays)


def evaluate_seal(index: SceneIndex, cup: CupModel, cand: SuctionCandidate,
                  keep_rays: bool = False, threshold: Optional[float] = None) -> SealResult:
    return evaluate_seal_batch(index, cup, [cand], keep_rays, threshold)[0]


def evaluate_seal_8vertex_batch(index: SceneIndex, cup: CupModel, cands: Sequence[SuctionCandidate],
                                keep_rays: bool = False) -> list[SealResult]:
    """Perimeter-only comparison model: eight outer-ring vertices, no
    neighbor-instance check."""
    return _seal_from_local(index, cup, cands, perimeter_local_vertices(cup, 8), False,
                            cup.spread_limit, keep_rays)


def evaluate_seal_8vertex(index: SceneIndex, cup: CupModel, cand: SuctionCandidate,
                          keep_rays: bool = False) -> SealResult:
    return evaluate_seal_8vertex_batch(index, cup, [cand], keep_rays)[0]


def _corridor_rays(cup: CupModel, params: CollisionParams):
    """Rays in the cup frame (x into the surface).

    Returns origins, directions, max lengths and the axial position each ray
    reports as clearance (-1 means use the hit distance).
    """
    rc = cup.radius + params.skin
    length = cup.rest_height + params.retreat
    pts = [np.zeros((1, 2))]
    for ring in range(1, params.axial_rings):
        r = rc * ring / (params.axial_rings - 1)
        n = max(8, params.axial_per_ring * ring // (params.axial_rings - 1))
        a = 2 * np.pi * np.arange(n) / n
        pts.append(np.column_stack([r * np.cos(a), r * np.sin(a)]))
    yz = np.vstack(pts)
    ax_o = np.column_stack([np.zeros(len(yz)), yz])
    ax_d = np.tile([-1.0, 0.0, 0.0], (len(yz), 1))
    ax_len = np.full(len(yz), length)
    ax_pos = np.full(len(yz), -1.0)

    s = np.linspace(0.0, length, params.radial_levels)
    a = 2 * np.pi * np.arange(params.radial_dirs) / params.radial_dirs
    S, A = np.meshgrid(s, a, indexing="ij")
    rad_o = np.column_stack([-S.ravel(), np.zeros(S.size), np.zeros(S.size)])
    rad_d = np.column_stack([np.zeros(S.size), np.cos(A).ravel(), np.sin(A).ravel()])
    rad_len = np.full(S.size, rc)
    return (np.vstack([ax_o, rad_o]), np.vstack([ax_d, rad_d]),
            np.concatenate([ax_len, rad_len]), np.concatenate([ax_pos, S.ravel()]))


def _ground_clearance(contact, normal, rc: float, length: float) -> float:
    """Axial distance at which the corridor cylinder first dips below z = 0
    (``inf`` if never)."""
    az = float(np.clip(normal[2], -1.0, 1.0))
    sink = rc * np.sqrt(max(0.0, 1.0 - az * az))
    z0 = contact[2] - sink
    if z0 < 0:
        return 0.0
    if az < 0:
        s = -z0 / az
        if s <= length:
            return float(s)
    return float("inf")


def evaluate_collision_batch(index: SceneIndex, cup: CupModel, cands: Sequence[SuctionCandidate],
                             params: CollisionParams = CollisionParams()) -> list[CollisionResult]:
    k = len(cands)
    if k == 0:
        return []
    lo, ld, llen, lpos = _corridor_rays(cup, params)
    R, T = _cup_frames(cands)
    m = len(lo)
    origins = np.einsum("kij,vj->kvi", R, lo) + T[:, None, :]
    dirs = np.einsum("kij,vj->kvi", R, ld)
    excl = np.repeat(np.array([c.instance_id for c in cands], dtype=np.int64), m)
    t, inst, _ = index.cast(origins.reshape(-1, 3), dirs.reshape(-1, 3), np.tile(llen, k), excl)
    t = t.reshape(k, m)
    inst = inst.reshape(k, m)
    rc = cup.radius + params.skin
    length = cup.rest_height + params.retreat
    out = []
    for i, c in enumerate(cands):
        hit = np.isfinite(t[i])
        clear = np.where(lpos < 0, t[i], lpos)
        best, blocker = length, None
        if hit.any():
            cl = clear[hit]
            ids = inst[i][hit]
            j = np.lexsort((ids, cl))[0]
            best, blocker = float(cl[j]), int(ids[j])
        if index.ground_plane and c.instance_id != GROUND_ID:
            g = _ground_clearance(c.contact, c.normal, rc, length)
            if g < best or (g == best and blocker is not None and GROUND_ID < blocker):
                best, blocker = g, GROUND_ID
        out.append(CollisionResult(blocker is None, blocker, best))
    return out


def evaluate_collision(index: SceneIndex, cup: CupModel, cand: SuctionCandidate,
                       params: CollisionParams = CollisionParams()) -> CollisionResult:
    return evaluate_collision_batch(index, cup, [cand], params)[0]
