"""Pipeline configuration: one JSON file plus ``key=value`` overrides."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional

from .candidates import SamplerConfig
from .cup import PRESETS, CupModel, preset
from .seal import CollisionParams
from .wrench import CONTACT_GAP, GATES


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class CupSection:
    preset: str = "cup_15mm"
    # None keeps the preset value
    radius: Optional[float] = None
    rest_height: Optional[float] = None
    num_rings: Optional[int] = None
    verts_per_ring: Optional[int] = None
    deformation_threshold: Optional[float] = None


@dataclass
class WrenchSection:
    force_limit: Optional[float] = None
    torque_limit: Optional[float] = None
    max_bend_deg: Optional[float] = None
    contact_gap: float = CONTACT_GAP


@dataclass
class SamplerSection:
    samples_per_object: int = 100
    frame_radius: float = 0.015
    min_neighbors: int = 3


@dataclass
class CollisionSection:
    skin: float = 0.002
    retreat: float = 0.10
    axial_rings: int = 3
    axial_per_ring: int = 32
    radial_levels: int = 12
    radial_dirs: int = 16


@dataclass
class FusionSection:
    voxel: float = 0.002
    normal_k: int = 20
    workspace_min: list = field(default_factory=lambda: [-0.25, -0.25, -0.005])
    workspace_max: list = field(default_factory=lambda: [0.25, 0.25, 0.5])


@dataclass
class RenderSection:
    n_views: int = 4
    width: int = 320
    height: int = 240
    hfov_deg: float = 60.0
    ring_radius: float = 0.45
    ring_height: float = 0.50


@dataclass
class AnnotationSection:
    radius: float = 0.015
    n_patches: int = 0
    points_per_patch: int = 10_000


@dataclass
class PolicySection:
    affordance_radius: float = 0.015
    safety_margin: float = 0.0


@dataclass
class EvaluationSection:
    gate: str = "all"


@dataclass
class IOSection:
    # optional inputs; empty means unset
    scene: str = ""
    views: str = ""
    scores: str = ""


@dataclass
class PipelineConfig:
    cup: CupSection = field(default_factory=CupSection)
    wrench: WrenchSection = field(default_factory=WrenchSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    collision: CollisionSection = field(default_factory=CollisionSection)
    fusion: FusionSection = field(default_factory=FusionSection)
    render: RenderSection = field(default_factory=RenderSection)
    annotation: AnnotationSection = field(default_factory=AnnotationSection)
    policy: PolicySection = field(default_factory=PolicySection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    io: IOSection = field(default_factory=IOSection)
    seed: int = 0
    jobs: int = 1  # 0 = one worker per CPU

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        cfg = cls()
        _merge(cfg, d, "")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path=None, overrides=()) -> "PipelineConfig":
        cfg = cls()
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError("config", f"file not found: {p}")
            try:
                doc = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"invalid JSON ({exc})")
            if not isinstance(doc, dict):
                raise ConfigError("config", "top level must be an object")
            _merge(cfg, doc, "")
        for item in overrides:
            cfg.set(item)
        cfg.validate()
        return cfg

    def set(self, item: str) -> None:
        """Apply one ``a.b=value`` override; values parse as JSON, else string."""
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.strip().split(".")
        tree: dict = value
        for p in reversed(parts):
            tree = {p: tree}
        _merge(self, tree, "")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    # -- resolved objects ----------------------------------------------------

    def cup_model(self) -> CupModel:
        kw = {k: v for k, v in asdict(self.cup).items() if k != "preset" and v is not None}
        w = self.wrench
        if w.force_limit is not None:
            kw["force_limit"] = w.force_limit
        if w.torque_limit is not None:
            kw["torque_limit"] = w.torque_limit
        if w.max_bend_deg is not None:
            kw["max_bend_angle"] = math.radians(w.max_bend_deg)
        try:
            return preset(self.cup.preset).with_overrides(**kw)
        except ValueError as exc:
            raise ConfigError("cup", str(exc))

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(**asdict(self.sampler))

    def collision_params(self) -> CollisionParams:
        return CollisionParams(**asdict(self.collision))

    def worker_count(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        c = self.cup
        if c.preset not in PRESETS:
            raise ConfigError("cup.preset", f"unknown preset {c.preset!r}; choose from {sorted(PRESETS)}")
        _positive(c, "cup", "radius", "rest_height", optional=True)
        _int_at_least(c, "cup", 1, "num_rings", optional=True)
        _int_at_least(c, "cup", 3, "verts_per_ring", optional=True)
        if c.deformation_threshold is not None and not 0 < c.deformation_threshold <= 1:
            raise ConfigError("cup.deformation_threshold", "must lie in (0, 1]")
        w = self.wrench
        _positive(w, "wrench", "force_limit", "torque_limit", optional=True)
        if w.max_bend_deg is not None and not 0 <= w.max_bend_deg <= 180:
            raise ConfigError("wrench.max_bend_deg", "must lie in [0, 180]")
        _positive(w, "wrench", "contact_gap")
        _int_at_least(self.sampler, "sampler", 1, "samples_per_object")
        _int_at_least(self.sampler, "sampler", 1, "min_neighbors")
        _positive(self.sampler, "sampler", "frame_radius")
        co = self.collision
        if not (isinstance(co.skin, (int, float)) and co.skin >= 0):
            raise ConfigError("collision.skin", "must be >= 0")
        _positive(co, "collision", "retreat")
        _int_at_least(co, "collision", 1, "axial_rings", "axial_per_ring", "radial_levels")
        _int_at_least(co, "collision", 3, "radial_dirs")
        f = self.fusion
        if not (isinstance(f.voxel, (int, float)) and f.voxel >= 0):
            raise ConfigError("fusion.voxel", "must be >= 0")
        _int_at_least(f, "fusion", 3, "normal_k")
        for name in ("workspace_min", "workspace_max"):
            v = getattr(f, name)
            if not (isinstance(v, list) and len(v) == 3 and all(isinstance(x, (int, float)) for x in v)):
                raise ConfigError(f"fusion.{name}", "expected 3 numbers")
        if any(a >= b for a, b in zip(f.workspace_min, f.workspace_max)):
            raise ConfigError("fusion.workspace_max", "must exceed workspace_min on every axis")
        r = self.render
        _int_at_least(r, "render", 1, "n_views", "width", "height")
        if not 0 < r.hfov_deg < 180:
            raise ConfigError("render.hfov_deg", "must lie in (0, 180)")
        _positive(r, "render", "ring_radius", "ring_height")
        _positive(self.annotation, "annotation", "radius")
        _int_at_least(self.annotation, "annotation", 0, "n_patches")
        _int_at_least(self.annotation, "annotation", 1, "points_per_patch")
        _positive(self.policy, "policy", "affordance_radius")
        if not (isinstance(self.policy.safety_margin, (int, float)) and self.policy.safety_margin >= 0):
            raise ConfigError("policy.safety_margin", "must be >= 0")
        if self.evaluation.gate not in GATES:
            raise ConfigError("evaluation.gate", f"must be one of {sorted(GATES)}")
        for name in ("scene", "views", "scores"):
            p = getattr(self.io, name)
            if not isinstance(p, str):
                raise ConfigError(f"io.{name}", "must be a path string")
            if p and not Path(p).exists():
                raise ConfigError(f"io.{name}", f"path not found: {p}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        if not isinstance(self.jobs, int) or self.jobs < 0:
            raise ConfigError("jobs", "must be a non-negative integer (0 = auto)")


def _merge(obj, d: dict, prefix: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(prefix.rstrip(".") or "config", "expected an object")
    names = {f.name for f in fields(obj)}
    for key, value in d.items():
        path = f"{prefix}{key}"
        if key not in names:
            raise ConfigError(path, "unknown field")
        current = getattr(obj, key)
        if is_dataclass(current):
            _merge(current, value, path + ".")
        else:
            if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            setattr(obj, key, value)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(section, prefix: str, *names, optional: bool = False) -> None:
    for n in names:
        v = getattr(section, n)
        if v is None and optional:
            continue
        if not (_is_num(v) and v > 0):
            raise ConfigError(f"{prefix}.{n}", "must be > 0")


def _int_at_least(section, prefix: str, lo: int, *names, optional: bool = False) -> None:
    for n in names:
        v = getattr(section, n)
        if v is None and optional:
            continue
        if not (isinstance(v, int) and not isinstance(v, bool) and v >= lo):
            raise ConfigError(f"{prefix}.{n}", f"must be an integer >= {lo}")
