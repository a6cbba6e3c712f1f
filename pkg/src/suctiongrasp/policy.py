"""Heuristic flatness affordance, safety-margin filtering and grasp ranking."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .annotation import ScoreMap
from .candidates import SuctionCandidate
from .geometry.distance import point_mesh_distance
from .geometry.spatial import PointIndex
from .geometry.types import GROUND_ID, PointCloud, SceneModel


def normal_variance_affordance(cloud: PointCloud, index: Optional[PointIndex] = None,
                               radius: float = 0.015) -> ScoreMap:
    """Flatness score per point from the dispersion of neighboring normals.

    With ``m`` the normalized mean of the neighbor normals, the dispersion is
    ``mean(1 - n_i . m)``, which lies in [0, 1]; the score is one minus that,
    i.e. the length of the mean neighbor normal. Ground points (label 0) are
    removed before neighborhoods are formed and score 0.

    ``index``, when given, must be built over the non-ground points.
    """
    if cloud.normals is None or cloud.labels is None:
        raise ValueError("cloud must carry normals and instance labels")
    keep = np.flatnonzero(cloud.labels != GROUND_ID)
    scores = np.zeros(len(cloud))
    if len(keep) == 0:
        return ScoreMap(scores)
    obj = cloud.subset(keep)
    index = index or PointIndex(obj)
    q, p = index.ball_query_pairs(obj.points, radius)
    sums = np.zeros((len(obj), 3))
    np.add.at(sums, q, obj.normals[p])
    counts = np.bincount(q, minlength=len(obj))
    mean_len = np.linalg.norm(sums, axis=1) / np.maximum(counts, 1)
    scores[keep] = np.clip(mean_len, 0.0, 1.0)
    return ScoreMap(scores)


def safety_margin_filter(scene: SceneModel, cands: Sequence[SuctionCandidate],
                         margin: float) -> list[SuctionCandidate]:
    """Drop candidates whose contact lies closer than ``margin`` to another
    object's surface. Order is preserved."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    cands = list(cands)
    if margin == 0 or not cands:
        return cands
    contacts = np.array([c.contact for c in cands])
    inst = np.array([c.instance_id for c in cands])
    near = np.full(len(cands), np.inf)
    for obj in scene.objects:
        mesh = obj.world_mesh()
        lo, hi = mesh.bounds()
        # box distance is a lower bound on the surface distance
        box_d = np.linalg.norm(np.maximum(0, np.maximum(lo - contacts, contacts - hi)), axis=1)
        sel = np.flatnonzero((inst != obj.instance_id) & (box_d < margin))
        if len(sel):
            near[sel] = np.minimum(near[sel], point_mesh_distance(contacts[sel], mesh))
    return [c for c, d in zip(cands, near) if not d < margin]


@dataclass(frozen=True)
class RankedGrasp:
    candidate: SuctionCandidate
    confidence: float
    rank: int

    def to_json(self) -> dict:
        c = self.candidate
        return {"rank": self.rank, "confidence": float(self.confidence),
                "candidate_id": c.candidate_id, "instance_id": c.instance_id,
                "contact_index": c.contact_index,
                "translation": [float(x) for x in c.pose.translation],
                "rotation": [float(x) for x in c.pose.rotation.ravel()]}


def candidate_confidences(cands: Sequence[SuctionCandidate], scores) -> np.ndarray:
    """Confidence of each candidate: its contact point's score, or the given
    per-candidate values."""
    if isinstance(scores, ScoreMap):
        idx = np.array([c.contact_index for c in cands], dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= len(scores)):
            raise ValueError("candidate contact index outside the score map")
        return scores.scores[idx] if len(idx) else np.zeros(0)
    conf = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(conf) != len(cands):
        raise ValueError("need exactly one confidence per candidate")
    return conf


def rank_candidates(cands: Sequence[SuctionCandidate], scores) -> list[RankedGrasp]:
    """Sort by confidence, descending; ties go to the lower contact index, then
    the lower candidate id."""
    cands = list(cands)
    conf = candidate_confidences(cands, scores)
    if np.any(~np.isfinite(conf)):
        raise ValueError("unresolvable candidate confidence")
    order = sorted(range(len(cands)),
                   key=lambda i: (-conf[i], cands[i].contact_index, cands[i].candidate_id))
    return [RankedGrasp(cands[i], float(conf[i]), r + 1) for r, i in enumerate(order)]


def write_ranked(path, ranked: Sequence[RankedGrasp]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for g in ranked:
            fh.write(json.dumps(g.to_json()) + "\n")


def read_ranked(path) -> list[RankedGrasp]:
    out = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(RankedGrasp(SuctionCandidate.from_json(d), float(d["confidence"]),
                                   int(d["rank"])))
    return out
