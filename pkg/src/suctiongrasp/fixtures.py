"""Procedural test geometry with analytically known outcomes.

Pads are slabs whose top surface carries one feature (tilt, groove, hole,
rough texture, step). Each pad also exposes its top surface as an analytic
height function, so the expected seal verdict for a vertical candidate at the
pad center can be computed without any ray casting:

* flat: passes.
* tilt(a): hit spread is ``2 R tan a``; passes iff that is within
  ``threshold * rest_height``.
* groove(w, d, l): rays landing in the groove travel ``d`` further; fails iff
  ``d`` exceeds the spread limit and the groove reaches a ray.
* hole(r): rays inside the hole miss; fails iff ``r`` exceeds the innermost
  ring radius (``R / num_rings``).
* rough(A, wavelength): spread is close to the peak-to-peak ``2A``.
* step(s): spread is ``s``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .candidates import SuctionCandidate
from .cup import CupModel, local_vertices, perimeter_local_vertices
from .geometry.io import write_scene
from .geometry.primitives import box_mesh, cylinder_mesh, sphere_mesh
from .geometry.types import Pose6D, SceneModel, SceneObject, TriangleMesh, rotation_about_axis

PAD_KINDS = ("flat", "tilt", "groove", "hole", "rough", "step")
_STEP_OFFSET = 0.0003   # keeps the step edge off the x = 0 ray column
_HOLE_SEGMENTS = 128


@dataclass(frozen=True)
class PadSpec:
    kind: str
    footprint: float = 0.08
    thickness: float = 0.01
    angle_deg: float = 0.0
    width: float = 0.0
    depth: float = 0.0
    length: Optional[float] = None
    radius: float = 0.0
    amplitude: float = 0.0
    wavelength: float = 0.0
    height: float = 0.0

    def __post_init__(self):
        k = self.kind
        if k not in PAD_KINDS:
            raise ValueError(f"unknown pad kind {k!r}")
        if not (self.footprint > 0 and self.thickness > 0):
            raise ValueError("footprint and thickness must be positive")
        half = self.footprint / 2
        if k == "tilt" and not 0 < self.angle_deg < 60:
            raise ValueError("tilt angle must lie in (0, 60) degrees")
        if k == "groove":
            if not (self.width > 0 and self.depth > 0):
                raise ValueError("groove width and depth must be positive")
            if self.depth >= self.thickness:
                raise ValueError("groove deeper than the slab")
            if self.width >= self.footprint:
                raise ValueError("groove wider than the pad")
            if self.length is not None and not 0 < self.length < self.footprint:
                raise ValueError("groove length must lie inside the pad")
        if k == "hole" and not 0 < self.radius < half:
            raise ValueError("hole radius must be positive and inside the pad")
        if k == "rough":
            if not (self.amplitude > 0 and self.wavelength > 0):
                raise ValueError("rough amplitude and wavelength must be positive")
            if self.amplitude >= self.thickness:
                raise ValueError("rough amplitude exceeds slab thickness")
        if k == "step" and not self.height > 0:
            raise ValueError("step height must be positive")

    @classmethod
    def flat(cls, **kw):
        return cls("flat", **kw)

    @classmethod
    def tilt(cls, angle_deg: float, **kw):
        return cls("tilt", angle_deg=angle_deg, **kw)

    @classmethod
    def groove(cls, width: float, depth: float, length: Optional[float] = None, **kw):
        return cls("groove", width=width, depth=depth, length=length, **kw)

    @classmethod
    def hole(cls, radius: float, **kw):
        return cls("hole", radius=radius, **kw)

    @classmethod
    def rough(cls, amplitude: float, wavelength: float, **kw):
        return cls("rough", amplitude=amplitude, wavelength=wavelength, **kw)

    @classmethod
    def step(cls, height: float, **kw):
        return cls("step", height=height, **kw)

    def validate_for(self, cup: CupModel) -> None:
        if self.footprint < 4 * cup.radius:
            raise ValueError(f"footprint {self.footprint} is below 4x the cup radius")

    @property
    def top(self) -> float:
        """Height of the top surface at the pad center."""
        return self.thickness

    def height_at(self, x, y) -> np.ndarray:
        """Analytic top-surface height; NaN where there is no surface."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        t = self.thickness
        h = np.full(np.broadcast(x, y).shape, t)
        half = self.footprint / 2
        if self.kind == "tilt":
            h = t - x * np.tan(np.radians(self.angle_deg))
        elif self.kind == "groove":
            hl = half if self.length is None else self.length / 2
            inside = (np.abs(x) < hl) & (np.abs(y) < self.width / 2)
            h = np.where(inside, t - self.depth, h)
        elif self.kind == "hole":
            h = np.where(x ** 2 + y ** 2 < self.radius ** 2, np.nan, h)
        elif self.kind == "rough":
            k = 2 * np.pi / self.wavelength
            h = t + self.amplitude * np.sin(k * x) * np.sin(k * y)
        elif self.kind == "step":
            h = np.where(x > _STEP_OFFSET, t + self.height, h)
        outside = (np.abs(x) > half) | (np.abs(y) > half)
        if self.kind != "tilt":
            h = np.where(outside, np.nan, h)
        return h


# ----------------------------------------------------------------------------
# meshing

class _Soup:
    """Triangle soup with outward-orientation fixing."""

    def __init__(self):
        self.v: list = []
        self.f: list = []

    def quad(self, p0, p1, p2, p3, outward):
        self.tri(p0, p1, p2, outward)
        self.tri(p0, p2, p3, outward)

    def tri(self, a, b, c, outward):
        a, b, c = (np.asarray(p, dtype=np.float64) for p in (a, b, c))
        if np.dot(np.cross(b - a, c - a), outward) < 0:
            b, c = c, b
        base = len(self.v)
        self.v += [a, b, c]
        self.f.append([base, base + 1, base + 2])

    def mesh(self) -> TriangleMesh:
        verts = np.array(self.v)
        uniq, inv = np.unique(np.round(verts, 12), axis=0, return_inverse=True)
        return TriangleMesh(uniq, inv.reshape(-1, 3))


def _block_mesh(xs, ys, tops) -> TriangleMesh:
    """Slab over the grid ``xs`` x ``ys`` with a flat top per cell and vertical
    walls where neighboring cells differ in height."""
    s = _Soup()
    nx, ny = len(xs) - 1, len(ys) - 1
    up, down = np.array([0, 0, 1.0]), np.array([0, 0, -1.0])
    for i in range(nx):
        for j in range(ny):
            z = tops[i][j]
            x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
            s.quad((x0, y0, z), (x1, y0, z), (x1, y1, z), (x0, y1, z), up)
            # +x neighbor wall or outer wall
            zn = tops[i + 1][j] if i + 1 < nx else 0.0
            if zn != z:
                lo, hi = min(z, zn), max(z, zn)
                s.quad((x1, y0, lo), (x1, y1, lo), (x1, y1, hi), (x1, y0, hi),
                       np.array([1.0 if z > zn else -1.0, 0, 0]))
            if i == 0:
                s.quad((x0, y0, 0), (x0, y1, 0), (x0, y1, z), (x0, y0, z), np.array([-1.0, 0, 0]))
            zn = tops[i][j + 1] if j + 1 < ny else 0.0
            if zn != z:
                lo, hi = min(z, zn), max(z, zn)
                s.quad((x0, y1, lo), (x1, y1, lo), (x1, y1, hi), (x0, y1, hi),
                       np.array([0, 1.0 if z > zn else -1.0, 0]))
            if j == 0:
                s.quad((x0, y0, 0), (x1, y0, 0), (x1, y0, z), (x0, y0, z), np.array([0, -1.0, 0]))
    s.quad((xs[0], ys[0], 0), (xs[-1], ys[0], 0), (xs[-1], ys[-1], 0), (xs[0], ys[-1], 0), down)
    return s.mesh()


def _square_boundary(theta, half):
    c, s = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore"):
        r = np.minimum(half / np.maximum(np.abs(c), 1e-300), half / np.maximum(np.abs(s), 1e-300))
    return np.column_stack([r * c, r * s])


def _hole_mesh(radius, half, t, segments=_HOLE_SEGMENTS) -> TriangleMesh:
    th = 2 * np.pi * np.arange(segments) / segments
    circ = np.column_stack([radius * np.cos(th), radius * np.sin(th)])
    sq = _square_boundary(th, half)
    s = _Soup()
    up, down = np.array([0, 0, 1.0]), np.array([0, 0, -1.0])
    for j in range(segments):
        k = (j + 1) % segments
        for z, n in ((t, up), (0.0, down)):
            s.quad((*circ[j], z), (*sq[j], z), (*sq[k], z), (*circ[k], z), n)
        mid = 0.5 * (circ[j] + circ[k])
        s.quad((*circ[j], 0), (*circ[k], 0), (*circ[k], t), (*circ[j], t),
               np.array([-mid[0], -mid[1], 0]))
        mid = 0.5 * (sq[j] + sq[k])
        if np.linalg.norm(sq[k] - sq[j]) > 0:
            s.quad((*sq[j], 0), (*sq[k], 0), (*sq[k], t), (*sq[j], t), np.array([mid[0], mid[1], 0]))
    return s.mesh()


def _heightfield_mesh(spec: PadSpec, cell: float) -> TriangleMesh:
    half = spec.footprint / 2
    n = int(np.ceil(spec.footprint / cell))
    g = np.linspace(-half, half, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    Z = spec.height_at(X, Y)
    top = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a = (i * (n + 1) + j).ravel()
    b = a + n + 1
    faces = [np.column_stack([a, b, b + 1]), np.column_stack([a, b + 1, a + 1])]
    verts = [top]
    # side walls along the border and a flat bottom
    base = len(top)
    ring = ([(0, q) for q in range(n + 1)] + [(p, n) for p in range(1, n + 1)]
            + [(n, q) for q in range(n - 1, -1, -1)] + [(p, 0) for p in range(n - 1, 0, -1)])
    ring_top = np.array([p * (n + 1) + q for p, q in ring])
    bottom = top[ring_top].copy()
    bottom[:, 2] = 0.0
    verts.append(bottom)
    m = len(ring_top)
    for r in range(m):
        s = (r + 1) % m
        faces.append(np.array([[ring_top[r], base + s, ring_top[s]],
                               [ring_top[r], base + r, base + s]]))
    center = base + m
    verts.append(np.array([[0.0, 0.0, 0.0]]))
    faces.append(np.column_stack([np.full(m, center), base + (np.arange(m) + 1) % m,
                                  base + np.arange(m)]))
    return TriangleMesh(np.vstack(verts), np.vstack(faces))


def make_pad(spec: PadSpec, rough_cell: float = 0.0005) -> TriangleMesh:
    """Pad mesh in world coordinates, centered on the z axis with its top at
    ``spec.top`` above the pad center."""
    half = spec.footprint / 2
    t = spec.thickness
    if spec.kind in ("flat", "tilt"):
        mesh = _block_mesh([-half, half], [-half, half], [[t]])
        if spec.kind == "tilt":
            pivot = np.array([0.0, 0.0, t])
            R = rotation_about_axis([0, 1, 0], np.radians(spec.angle_deg))
            mesh = TriangleMesh((mesh.vertices - pivot) @ R.T + pivot, mesh.triangles)
        return mesh
    if spec.kind == "groove":
        hl = half if spec.length is None else spec.length / 2
        hw = spec.width / 2
        xs = [-half, half] if hl >= half else [-half, -hl, hl, half]
        ys = [-half, -hw, hw, half]
        tops = [[t - spec.depth if (abs(0.5 * (xs[i] + xs[i + 1])) < hl and j == 1) else t
                 for j in range(3)] for i in range(len(xs) - 1)]
        return _block_mesh(xs, ys, tops)
    if spec.kind == "step":
        return _block_mesh([-half, _STEP_OFFSET, half], [-half, half], [[t], [t + spec.height]])
    if spec.kind == "hole":
        return _hole_mesh(spec.radius, half, t)
    return _heightfield_mesh(spec, rough_cell)


def analytic_seal(height_fn: Callable, instance_fn: Optional[Callable], cup: CupModel,
                  contact_z: float, target: int = 1, perimeter: bool = False):
    """Seal outcome for a vertical candidate at (0, 0, contact_z) over a height
    field, computed without ray casting.

    Returns ``(passed, spread, hit_count)``.
    """
    local = perimeter_local_vertices(cup, 8) if perimeter else local_vertices(cup)
    # cup frame for a vertical approach from above: x -> -z, y -> -x', z -> y'
    x = -local[:, 1]
    y = local[:, 2]
    h = height_fn(x, y)
    d = contact_z + cup.rest_height - h
    hit = np.isfinite(d) & (d >= 0) & (d <= 2 * cup.rest_height)
    if not perimeter and instance_fn is not None:
        foreign = hit & (instance_fn(x, y) != target)
    else:
        foreign = np.zeros_like(hit)
    spread = float(d[hit].max() - d[hit].min()) if hit.any() else float("inf")
    passed = bool(hit.all() and not foreign.any() and spread <= cup.spread_limit)
    return passed, spread, int(hit.sum())


def vertical_candidate(point, instance_id: int = 1, candidate_id: int = 0) -> SuctionCandidate:
    """Candidate with outward normal +z at ``point``."""
    R = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])  # columns: z, x, y
    return SuctionCandidate(Pose6D(R, point), instance_id, 0, candidate_id)


@dataclass(frozen=True, eq=False)
class BoardCase:
    name: str
    scene: SceneModel
    candidate: SuctionCandidate
    expected_960: bool
    expected_8: bool
    spec: Optional[PadSpec] = None
    expected_spread: float = float("nan")


def pad_case(name: str, spec: PadSpec, cup: CupModel) -> BoardCase:
    spec.validate_for(cup)
    scene = SceneModel((SceneObject(1, make_pad(spec)),), ground_plane=False)
    full, spread, _ = analytic_seal(spec.height_at, None, cup, spec.top)
    per, _, _ = analytic_seal(spec.height_at, None, cup, spec.top, perimeter=True)
    return BoardCase(name, scene, vertical_candidate([0.0, 0.0, spec.top]), full, per, spec, spread)


def _neighbor_cases(cup: CupModel) -> list[BoardCase]:
    t, half = 0.01, 0.04
    slab = _block_mesh([-half, half], [-half, half], [[t]])
    gap = 0.0005
    # neighbor of equal height beside the target; contact 5 mm from the shared edge
    adj = SceneModel((SceneObject(1, slab),
                      SceneObject(2, slab, Pose6D(np.eye(3), [2 * half + gap, 0, 0]))), False)
    cx = half - 0.005

    def adj_h(x, y):
        x = x + cx
        return np.where((x <= half) | (x >= half + gap), t, np.nan)

    def adj_i(x, y):
        return np.where(x + cx <= half, 1, 2)

    cand = vertical_candidate([cx, 0.0, t])
    e960 = analytic_seal(adj_h, adj_i, cup, t)[0]
    e8 = analytic_seal(adj_h, adj_i, cup, t, perimeter=True)[0]
    cases = [BoardCase("adjacent_object", adj, cand, e960, e8)]

    # thin sheet lying over part of the target's top face
    sheet_t = 0.001
    sheet = _block_mesh([0.005, 0.045], [-half, half], [[sheet_t]])
    ovl = SceneModel((SceneObject(1, slab), SceneObject(2, sheet, Pose6D(np.eye(3), [0, 0, t]))),
                     False)

    def ovl_h(x, y):
        return np.where(x >= 0.005, t + sheet_t, t)

    def ovl_i(x, y):
        return np.where(x >= 0.005, 2, 1)

    cand = vertical_candidate([0.0, 0.0, t])
    e960 = analytic_seal(ovl_h, ovl_i, cup, t)[0]
    e8 = analytic_seal(ovl_h, ovl_i, cup, t, perimeter=True)[0]
    cases.append(BoardCase("overlapping_object", ovl, cand, e960, e8))
    return cases


def board_specs(cup: CupModel) -> list[tuple[str, PadSpec]]:
    """Pads whose parameters sit clearly on either side of each verdict boundary."""
    lim = cup.spread_limit
    R = cup.radius
    r1 = cup.innermost_ring_radius
    ring_gap = R / cup.num_rings
    fp = max(0.08, 4 * R + 0.01)
    crit = np.degrees(np.arctan(lim / (2 * R)))
    groove_w = 3.7 * ring_gap
    return [
        ("flat", PadSpec.flat(footprint=fp)),
        ("tilt_low", PadSpec.tilt(0.5 * crit, footprint=fp)),
        ("tilt_near_pass", PadSpec.tilt(0.9 * crit, footprint=fp)),
        ("tilt_near_fail", PadSpec.tilt(1.1 * crit, footprint=fp)),
        ("tilt_10deg", PadSpec.tilt(10.0, footprint=fp)),
        ("groove_through", PadSpec.groove(groove_w, 2.5 * lim, footprint=fp)),
        ("groove_interior", PadSpec.groove(groove_w, 2.5 * lim, length=1.29 * R, footprint=fp)),
        ("groove_shallow", PadSpec.groove(groove_w, 0.5 * lim, length=1.29 * R, footprint=fp)),
        ("hole_pore", PadSpec.hole(0.55 * r1, footprint=fp)),
        ("hole_interior", PadSpec.hole(2.55 * r1, footprint=fp)),
        ("hole_oversized", PadSpec.hole(1.3 * R, footprint=fp)),
        ("rough_fine", PadSpec.rough(0.25 * lim, 0.6667 * R, footprint=fp)),
        ("rough_coarse", PadSpec.rough(1.25 * lim, 0.6667 * R, footprint=fp)),
        ("step_low", PadSpec.step(0.5 * lim, footprint=fp)),
        ("step_high", PadSpec.step(2.0 * lim, footprint=fp)),
    ]


def make_board(cup: CupModel = CupModel(), include_neighbors: bool = True) -> list[BoardCase]:
    """The procedural test board: one case per pad plus neighbor-object cases."""
    cases = [pad_case(name, spec, cup) for name, spec in board_specs(cup)]
    if include_neighbors:
        cases += _neighbor_cases(cup)
    return cases


# ----------------------------------------------------------------------------
# stacked and demo scenes

@dataclass(frozen=True)
class BoxSpec:
    size: tuple
    mass: float
    xy: tuple = (0.0, 0.0)
    z: Optional[float] = None  # bottom height; None drops the box onto what is below
    friction: float = 0.5
    yaw_deg: float = 0.0


def _footprint_overlap(a, b) -> bool:
    return bool(np.all(a[0][:2] < b[1][:2]) and np.all(b[0][:2] < a[1][:2]))


def make_stack_scene(specs: Sequence[BoxSpec], ground_plane: bool = True) -> SceneModel:
    """Axis-aligned boxes placed in order; a box without ``z`` drops onto the
    highest box under its footprint (or the ground). Explicit placements that
    intersect an existing box raise ``ValueError``."""
    placed: list[tuple[np.ndarray, np.ndarray]] = []
    objs = []
    for i, s in enumerate(specs, start=1):
        if s.yaw_deg:
            raise ValueError("stacked boxes must be axis-aligned")
        size = np.asarray(s.size, dtype=np.float64)
        lo = np.array([s.xy[0] - size[0] / 2, s.xy[1] - size[1] / 2, 0.0])
        hi = np.array([s.xy[0] + size[0] / 2, s.xy[1] + size[1] / 2, 0.0])
        if s.z is None:
            z = max([0.0] + [b[1][2] for b in placed if _footprint_overlap((lo, hi), b)])
        else:
            z = float(s.z)
            for b in placed:
                if _footprint_overlap((lo, hi), b) and z < b[1][2] and b[0][2] < z + size[2]:
                    raise ValueError(f"box {i} overlaps an earlier box")
        lo[2], hi[2] = z, z + size[2]
        placed.append((lo, hi))
        pose = Pose6D(np.eye(3), [s.xy[0], s.xy[1], z + size[2] / 2])
        objs.append(SceneObject(i, box_mesh(size), pose, s.mass, s.friction))
    return SceneModel(tuple(objs), ground_plane)


def box_on_plane_scene(size=(0.1, 0.08, 0.05), mass: float = 0.5) -> SceneModel:
    return make_stack_scene([BoxSpec(size, mass)])


def demo_scene() -> SceneModel:
    """Small clutter: a two-box stack, a heavy box, a cylinder and a sphere."""
    yaw = rotation_about_axis([0, 0, 1], np.radians(20.0))
    objs = (
        SceneObject(1, box_mesh((0.12, 0.08, 0.05)), Pose6D(np.eye(3), [-0.08, 0.03, 0.025]), 0.4, 0.6),
        SceneObject(2, box_mesh((0.06, 0.06, 0.04)), Pose6D(np.eye(3), [-0.09, 0.03, 0.07]), 0.2, 0.5),
        SceneObject(3, cylinder_mesh(0.035, 0.10, 48), Pose6D(np.eye(3), [0.07, 0.08, 0.05]), 0.3, 0.4),
        SceneObject(4, sphere_mesh(0.04, 16, 32), Pose6D(np.eye(3), [0.09, -0.06, 0.04]), 0.15, 0.7),
        SceneObject(5, box_mesh((0.09, 0.07, 0.06)), Pose6D(yaw, [-0.05, -0.09, 0.03]), 2.5, 0.5),
    )
    return SceneModel(objs, True)


def demo_cameras(n: int = 4, radius: float = 0.45, height: float = 0.50,
                 target=(0.0, 0.0, 0.03)) -> list[Pose6D]:
    from .geometry.types import look_at
    poses = []
    for k in range(n):
        a = 2 * np.pi * k / n + np.pi / 4
        poses.append(look_at([radius * np.cos(a), radius * np.sin(a), height], target))
    return poses


def perf_scene(n_spheres: int = 5, n_lat: int = 51, n_lon: int = 100) -> SceneModel:
    """Spheres on a grid; 10k triangles each at the defaults."""
    objs = []
    for i in range(n_spheres):
        x = 0.12 * (i - (n_spheres - 1) / 2)
        objs.append(SceneObject(i + 1, sphere_mesh(0.05, n_lat, n_lon),
                                Pose6D(np.eye(3), [x, 0.0, 0.05]), 0.3, 0.5))
    return SceneModel(tuple(objs), True)


def emit_fixtures(directory, cup: CupModel = CupModel()) -> Path:
    """Write every board case as OBJ meshes plus scene.json, and a board.json
    index with the expected verdicts."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for case in make_board(cup):
        d = directory / case.name
        d.mkdir(exist_ok=True)
        write_scene(d / "scene.json", case.scene)
        index.append({"case": case.name, "scene": f"{case.name}/scene.json",
                      "candidate": case.candidate.to_json(),
                      "expected_960": case.expected_960, "expected_8": case.expected_8,
                      "pad": None if case.spec is None else asdict(case.spec)})
    stack = make_stack_scene([BoxSpec((0.1, 0.1, 0.05), 1.5), BoxSpec((0.08, 0.08, 0.04), 1.0)])
    (directory / "stack").mkdir(exist_ok=True)
    write_scene(directory / "stack" / "scene.json", stack)
    (directory / "board.json").write_text(json.dumps({"cup": cup.to_json(), "cases": index},
                                                     indent=2) + "\n")
    return directory / "board.json"
