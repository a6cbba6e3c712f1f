"""Per-point score maps from evaluated candidates, and training patch crops."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .geometry.io import read_ply, write_ply
from .geometry.spatial import PointIndex
from .geometry.types import PointCloud


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Scores in [0, 1] parallel to a point cloud.

    ``sources`` maps a positive point index to the ids of the candidates that
    labeled it (ground-truth maps only).
    """

    scores: np.ndarray
    sources: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if s.size and (s.min() < 0 or s.max() > 1 or not np.all(np.isfinite(s))):
            raise ValueError("scores must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def __len__(self) -> int:
        return len(self.scores)

    def is_binary(self) -> bool:
        return bool(np.all((self.scores == 0) | (self.scores == 1)))

    def restrict(self, indices) -> "ScoreMap":
        idx = np.asarray(indices, dtype=np.int64)
        src = None
        if self.sources is not None:
            src = {k: self.sources[int(p)] for k, p in enumerate(idx) if int(p) in self.sources}
        return ScoreMap(self.scores[idx], src)


def _passing_translations(records) -> tuple[np.ndarray, list[int]]:
    pts, ids = [], []
    for r in records:
        if getattr(r, "q", 1) != 1:
            continue
        cand = getattr(r, "candidate", r)
        pts.append(cand.contact)
        ids.append(cand.candidate_id)
    return np.array(pts).reshape(-1, 3), ids


def annotate_scores(cloud: PointCloud, index: Optional[PointIndex], records: Iterable,
                    radius: float = 0.015) -> ScoreMap:
    """Binary map: 1 for every point within ``radius`` of a passing contact.

    ``records`` may hold evaluation records (only q == 1 counts) or bare
    candidates (all count).
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    index = index or PointIndex(cloud)
    centers, ids = _passing_translations(records)
    scores = np.zeros(len(cloud))
    sources: dict[int, list[int]] = {}
    if len(centers):
        for cid, members in zip(ids, index.ball_query_many(centers, radius)):
            scores[members] = 1.0
            for p in members.tolist():
                sources.setdefault(p, []).append(cid)
    return ScoreMap(scores, {k: sorted(v) for k, v in sorted(sources.items())})


@dataclass(frozen=True, eq=False)
class Patch:
    cloud: PointCloud
    scores: ScoreMap
    parent_indices: np.ndarray
    center_index: int

    def __iter__(self):
        # unpacks as (cloud, scores)
        return iter((self.cloud, self.scores))


def crop_patches(cloud: PointCloud, score_map: ScoreMap, n_patches: int,
                 points_per_patch: int = 10_000, rng_seed=0,
                 index: Optional[PointIndex] = None) -> list[Patch]:
    """Uniformly drawn centers, each with its ``points_per_patch`` nearest points."""
    if len(cloud) < points_per_patch:
        raise ValueError(f"cloud too small: {len(cloud)} < {points_per_patch} points")
    if len(score_map) != len(cloud):
        raise ValueError("score map length differs from cloud length")
    if n_patches < 1:
        raise ValueError("n_patches must be >= 1")
    rng = np.random.default_rng(rng_seed)
    centers = rng.choice(len(cloud), size=n_patches, replace=n_patches > len(cloud))
    index = index or PointIndex(cloud)
    _, nbr = index.knn(cloud.points[centers], points_per_patch)
    return [Patch(cloud.subset(idx), score_map.restrict(idx), idx, int(c))
            for c, idx in zip(centers, nbr)]


def write_score_map(ply_path, cloud: PointCloud, score_map: ScoreMap,
                    sidecar: bool = True) -> None:
    """scores.ply with a float ``score`` property plus scores.json listing the
    contributing candidate ids."""
    write_ply(ply_path, cloud, extra={"score": score_map.scores})
    if sidecar:
        contributing = sorted({c for v in (score_map.sources or {}).values() for c in v})
        Path(ply_path).with_suffix(".json").write_text(json.dumps(
            {"n_points": len(score_map), "n_positive": int(np.sum(score_map.scores > 0)),
             "candidate_ids": contributing}, indent=2) + "\n")


def read_score_map(ply_path) -> tuple[PointCloud, ScoreMap]:
    cloud, extra = read_ply(ply_path, with_extra=True)
    if "score" not in extra:
        raise ValueError(f"{ply_path}: no 'score' property")
    return cloud, ScoreMap(np.clip(extra["score"].astype(np.float64), 0.0, 1.0))


def write_score_colors(ply_path, cloud: PointCloud, score_map: ScoreMap) -> None:
    """PLY with uchar red/green/blue running from red (0) to green (1), for viewers."""
    s = score_map.scores
    rgb = {"red": np.round(255 * (1 - s)).astype(np.uint8),
           "green": np.round(255 * s).astype(np.uint8),
           "blue": np.zeros(len(s), dtype=np.uint8)}
    write_ply(ply_path, cloud, extra={"score": s, **rgb})
