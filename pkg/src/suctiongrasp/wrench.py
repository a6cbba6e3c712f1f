"""Quasi-static lift check and the combined grasp quality.

The lift check stands in for a dynamic simulation: the cup must carry the
target plus everything resting on it (force), hold the gravity moment about
the contact (torque), and stay within its bend limit.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .candidates import SuctionCandidate
from .cup import CupModel
from .geometry.bvh import SceneIndex
from .geometry.types import GROUND_ID, SceneModel
from .seal import (CollisionParams, CollisionResult, SealResult, evaluate_collision_batch,
                   evaluate_seal_batch)

GRAVITY = 9.80665
CONTACT_GAP = 0.003
_WITNESS_SAMPLES = 512


@dataclass(frozen=True)
class SupportGraph:
    """``edges`` holds (supporter, supported) pairs; ``load`` maps each
    instance to the mass it carries including its own."""

    edges: tuple[tuple[int, int], ...]
    load: dict
    mass: dict
    grounded: frozenset = frozenset()

    def supporters(self, instance_id: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == instance_id)

    def supported(self, instance_id: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == instance_id)


def _downward_witnesses(obj, n: int, seed: int) -> np.ndarray:
    mesh = obj.world_mesh()
    fn = mesh.face_normals()
    down = np.flatnonzero(fn[:, 2] < -1e-6)
    if len(down) == 0:
        return np.zeros((0, 3))
    corners = mesh.corners[down]
    areas = mesh.face_areas()[down]
    rng = np.random.default_rng(seed)
    face = np.minimum(np.searchsorted(np.cumsum(areas), rng.random(n) * areas.sum(), side="right"),
                      len(areas) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    c = corners[face]
    pts = ((1 - r1)[:, None] * c[:, 0] + (r1 * (1 - r2))[:, None] * c[:, 1]
           + (r1 * r2)[:, None] * c[:, 2])
    # triangle corners are exact contact witnesses for coplanar stacks
    return np.vstack([pts, corners.reshape(-1, 3)])


def build_support_graph(scene: SceneModel, index: Optional[SceneIndex] = None,
                        gap: float = CONTACT_GAP) -> SupportGraph:
    """Find resting contacts and accumulate pile loads.

    ``a`` supports ``b`` when a downward ray from a point on ``b``'s underside
    reaches ``a`` within ``gap``. Edges must point upward in (center-of-mass
    height, instance id) order, which keeps the graph acyclic. A supported
    object's load is split equally among its supporters; the ground plane
    counts as one supporter when touched but carries no load in the graph.
    """
    index = index or SceneIndex(scene)
    com_z = {o.instance_id: float(o.center_of_mass()[2]) for o in scene.objects}
    lift = 0.5 * gap
    edges = set()
    grounded = set()
    for o in scene.objects:
        w = _downward_witnesses(o, _WITNESS_SAMPLES, o.instance_id)
        if len(w) == 0:
            continue
        origins = w + np.array([0.0, 0.0, lift])
        dirs = np.tile([0.0, 0.0, -1.0], (len(w), 1))
        _, inst, _ = index.cast(origins, dirs, gap + lift, exclude=o.instance_id)
        for a in np.unique(inst):
            if a == GROUND_ID:
                grounded.add(o.instance_id)
            if a <= GROUND_ID:
                continue
            a = int(a)
            if (com_z[a], a) < (com_z[o.instance_id], o.instance_id):
                edges.add((a, o.instance_id))
    edges = tuple(sorted(edges))
    mass = {o.instance_id: float(o.mass) for o in scene.objects}
    supporters = {i: [a for a, b in edges if b == i] for i in mass}
    load = dict(mass)
    # top-down: process in descending (com_z, id) so each object is final
    # before its load is passed to its supporters
    for i in sorted(mass, key=lambda i: (com_z[i], i), reverse=True):
        sup = supporters[i]
        share = len(sup) + (1 if i in grounded else 0)
        for a in sup:
            load[a] += load[i] / share
    return SupportGraph(edges, load, mass, frozenset(grounded))


@dataclass(frozen=True)
class WrenchResult:
    passed: bool
    payload_force: float
    gravity_torque: float
    bend_angle: float
    supported_mass: float
    failure_reason: str = "none"


def evaluate_wrench(scene: SceneModel, graph: SupportGraph, cup: CupModel,
                    cand: SuctionCandidate) -> WrenchResult:
    obj = scene.get(cand.instance_id)  # KeyError on unknown ids
    m = graph.load[cand.instance_id]
    force = m * GRAVITY
    lever = obj.center_of_mass() - cand.contact
    torque = float(np.linalg.norm(np.cross(lever, [0.0, 0.0, -m * GRAVITY])))
    bend = float(np.arccos(np.clip(cand.normal[2], -1.0, 1.0)))
    reason = "none"
    if force > cup.force_limit:
        reason = "force"
    elif torque > cup.torque_limit:
        reason = "torque"
    elif bend > cup.max_bend_angle:
        reason = "bend"
    return WrenchResult(reason == "none", float(force), torque, bend, float(m), reason)


GATES = {
    "all": ("collision", "seal", "dynamics"),
    "geometric": ("collision", "seal"),
    "seal-only": ("seal",),
}


@dataclass(frozen=True, eq=False)
class EvaluationRecord:
    """Per-candidate gate outcomes. A gate value of ``None`` means skipped."""

    candidate: SuctionCandidate
    q_collision: Optional[bool]
    q_seal: Optional[bool]
    q_dynamics: Optional[bool]
    collision: Optional[CollisionResult] = None
    seal: Optional[SealResult] = None
    wrench: Optional[WrenchResult] = None
    gates: tuple[str, ...] = field(default=GATES["all"])

    @property
    def candidate_id(self) -> int:
        return self.candidate.candidate_id

    @property
    def q(self) -> int:
        bits = {"collision": self.q_collision, "seal": self.q_seal, "dynamics": self.q_dynamics}
        return int(all(bits[g] is True for g in self.gates))

    def to_json(self) -> dict:
        def bit(v):
            return "skipped" if v is None else int(v)

        def num(x):
            return float(x) if x is not None and np.isfinite(x) else None

        d = {"candidate_id": self.candidate_id, "instance_id": self.candidate.instance_id,
             "q_collision": bit(self.q_collision), "q_seal": bit(self.q_seal),
             "q_dynamics": bit(self.q_dynamics), "q": self.q}
        d["blocking_instance"] = None if self.collision is None else self.collision.blocking_instance
        d["clearance"] = None if self.collision is None else num(self.collision.clearance)
        d["hit_count"] = None if self.seal is None else self.seal.hit_count
        d["spread"] = None if self.seal is None else num(self.seal.spread)
        d["foreign_hits"] = None if self.seal is None else self.seal.foreign_hits
        d["payload_force"] = None if self.wrench is None else num(self.wrench.payload_force)
        d["failure_reason"] = None if self.wrench is None else self.wrench.failure_reason
        return d


@dataclass
class Evaluator:
    """Shared read-only state for evaluating candidates of one scene."""

    scene: SceneModel
    cup: CupModel
    collision_params: CollisionParams = field(default_factory=CollisionParams)
    index: Optional[SceneIndex] = None
    graph: Optional[SupportGraph] = None

    def __post_init__(self):
        if self.index is None:
            self.index = SceneIndex(self.scene)
        if self.graph is None:
            self.graph = build_support_graph(self.scene, self.index)

    def evaluate(self, cands: Sequence[SuctionCandidate], gates=GATES["all"],
                 short_circuit: bool = True) -> list[EvaluationRecord]:
        """Run the gates in order collision, seal, dynamics.

        With ``short_circuit`` a failed gate marks the later gates skipped.
        """
        gates = tuple(gates)
        cands = list(cands)
        n = len(cands)
        col: list = [None] * n
        seal: list = [None] * n
        wr: list = [None] * n
        alive = list(range(n))
        if "collision" in gates:
            res = evaluate_collision_batch(self.index, self.cup, [cands[i] for i in alive],
                                           self.collision_params)
            for i, r in zip(alive, res):
                col[i] = r
            if short_circuit:
                alive = [i for i in alive if col[i].passed]
        if "seal" in gates:
            res = evaluate_seal_batch(self.index, self.cup, [cands[i] for i in alive])
            for i, r in zip(alive, res):
                seal[i] = r
            if short_circuit:
                alive = [i for i in alive if seal[i].passed]
        if "dynamics" in gates:
            for i in alive:
                wr[i] = evaluate_wrench(self.scene, self.graph, self.cup, cands[i])
        return [EvaluationRecord(c,
                                 None if col[i] is None else col[i].passed,
                                 None if seal[i] is None else seal[i].passed,
                                 None if wr[i] is None else wr[i].passed,
                                 col[i], seal[i], wr[i], gates)
                for i, c in enumerate(cands)]

    def evaluate_parallel(self, cands: Sequence[SuctionCandidate], jobs: int = 1,
                          gates=GATES["all"], chunk: int = 64,
                          short_circuit: bool = True) -> list[EvaluationRecord]:
        """Same result as :meth:`evaluate`, computed by ``jobs`` worker threads."""
        cands = list(cands)
        if jobs <= 1 or len(cands) <= chunk:
            return self.evaluate(cands, gates, short_circuit)
        parts = [cands[i:i + chunk] for i in range(0, len(cands), chunk)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda p: self.evaluate(p, gates, short_circuit), parts))
        return [r for part in results for r in part]


def evaluate_candidate_full(scene: SceneModel, scene_index: SceneIndex, graph: SupportGraph,
                            cup: CupModel, cand: SuctionCandidate,
                            collision_params: CollisionParams = CollisionParams()) -> EvaluationRecord:
    """Collision, then seal, then lift; Q is the product of the three bits."""
    ev = Evaluator(scene, cup, collision_params, scene_index, graph)
    return ev.evaluate([cand])[0]


def write_evaluations(path, records: Sequence[EvaluationRecord]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


def read_evaluations(path) -> list[dict]:
    """Evaluation records as plain dicts (the candidate itself lives in candidates.jsonl)."""
    with open(path, encoding="ascii") as fh:
        return [json.loads(line) for line in fh if line.strip()]
