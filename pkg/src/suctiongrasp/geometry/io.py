"""Readers and writers: PLY point clouds, OBJ/STL meshes, depth maps, scene files."""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .types import CameraIntrinsics, PointCloud, Pose6D, SceneModel, SceneObject, TriangleMesh

UNIT_SCALE = {"m": 1.0, "cm": 0.01, "mm": 0.001}

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


class FormatError(ValueError):
    """Malformed or unsupported input file."""


def _unit_scale(units: str) -> float:
    try:
        return UNIT_SCALE[units]
    except KeyError:
        raise FormatError(f"unknown length unit {units!r}; expected one of {sorted(UNIT_SCALE)}")


# ----------------------------------------------------------------------------
# PLY

def read_ply(path, with_extra: bool = False):
    """Read a PLY vertex element (ASCII or binary little-endian).

    Recognized properties: x, y, z, nx, ny, nz, instance_id (or label).
    With ``with_extra=True`` also returns a dict of the remaining properties.
    """
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise FormatError(f"{path}: not a PLY file")
        fmt = None
        elements: list[tuple[str, int, list[tuple[str, str]]]] = []
        while True:
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: truncated header")
            tok = line.decode("ascii", "replace").split()
            if not tok or tok[0] in ("comment", "obj_info"):
                continue
            if tok[0] == "format":
                fmt = tok[1]
            elif tok[0] == "element":
                elements.append((tok[1], int(tok[2]), []))
            elif tok[0] == "property":
                if tok[1] == "list":
                    raise FormatError(f"{path}: list properties are not supported")
                if tok[1] not in _PLY_TYPES:
                    raise FormatError(f"{path}: unknown property type {tok[1]}")
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
            elif tok[0] == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian"):
            raise FormatError(f"{path}: unsupported PLY format {fmt}")
        if not elements or elements[0][0] != "vertex":
            raise FormatError(f"{path}: first element must be 'vertex'")
        _, count, props = elements[0]
        names = [p[0] for p in props]
        if fmt == "ascii":
            data = np.loadtxt(fh, max_rows=count, ndmin=2) if count else np.zeros((0, len(props)))
            cols = {n: data[:, i] for i, n in enumerate(names)}
        else:
            dt = np.dtype([(n, "<" + t) for n, t in props])
            raw = fh.read(dt.itemsize * count)
            if len(raw) < dt.itemsize * count:
                raise FormatError(f"{path}: truncated vertex data")
            arr = np.frombuffer(raw, dtype=dt, count=count)
            cols = {n: arr[n] for n in names}
    for c in "xyz":
        if c not in cols:
            raise FormatError(f"{path}: missing property {c}")
    pts = np.column_stack([cols["x"], cols["y"], cols["z"]]).astype(np.float64)
    normals = None
    if all(c in cols for c in ("nx", "ny", "nz")):
        normals = np.column_stack([cols["nx"], cols["ny"], cols["nz"]]).astype(np.float64)
        nn = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = normals / np.where(nn > 0, nn, 1.0)
    lab_key = "instance_id" if "instance_id" in cols else ("label" if "label" in cols else None)
    labels = None if lab_key is None else np.asarray(cols[lab_key]).astype(np.int64)
    cloud = PointCloud(pts, normals, labels)
    if with_extra:
        skip = {"x", "y", "z", "nx", "ny", "nz", lab_key}
        return cloud, {k: np.asarray(v) for k, v in cols.items() if k not in skip}
    return cloud


def write_ply(path, cloud: PointCloud, extra: Optional[dict] = None, binary: bool = True) -> None:
    """Write x,y,z (double)[, nx,ny,nz][, instance_id uint32][, extra props].

    Extra properties are stored as float unless given as uint8 arrays, which
    are stored as uchar (e.g. red/green/blue for viewers).
    """
    n = len(cloud)
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    cols = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]]
    if cloud.normals is not None:
        fields += [("nx", "f8"), ("ny", "f8"), ("nz", "f8")]
        cols += [cloud.normals[:, 0], cloud.normals[:, 1], cloud.normals[:, 2]]
    if cloud.labels is not None:
        fields.append(("instance_id", "u4"))
        cols.append(cloud.labels)
    for name, values in (extra or {}).items():
        values = np.asarray(values)
        if values.shape != (n,):
            raise ValueError(f"extra property {name} has wrong length")
        fields.append((name, "u1" if values.dtype == np.uint8 else "f4"))
        cols.append(values)
    ply_name = {"f8": "double", "f4": "float", "u4": "uint", "u1": "uchar"}
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
              f"element vertex {n}"]
    header += [f"property {ply_name[t]} {name}" for name, t in fields]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            arr = np.empty(n, dtype=np.dtype([(nm, "<" + t) for nm, t in fields]))
            for (nm, _), c in zip(fields, cols):
                arr[nm] = c
            fh.write(arr.tobytes())
        else:
            for i in range(n):
                row = []
                for (_, t), c in zip(fields, cols):
                    row.append(str(int(c[i])) if t[0] == "u" else repr(float(c[i])))
                fh.write((" ".join(row) + "\n").encode("ascii"))


# ----------------------------------------------------------------------------
# Meshes

def read_obj(path, units: str = "m", clean: bool = True) -> TriangleMesh:
    """Read vertices and faces from a Wavefront OBJ; polygons are fan-triangulated."""
    verts, faces = [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "v":
                verts.append([float(t) for t in tok[1:4]])
            elif tok[0] == "f":
                idx = []
                for t in tok[1:]:
                    i = int(t.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for j in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[j], idx[j + 1]])
    if not faces:
        raise FormatError(f"{path}: no faces")
    mesh = TriangleMesh(np.array(verts) * _unit_scale(units), np.array(faces))
    return mesh.cleaned()[0] if clean else mesh


def write_obj(path, mesh: TriangleMesh) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for v in mesh.vertices:
            fh.write("v %r %r %r\n" % (float(v[0]), float(v[1]), float(v[2])))
        for f in mesh.triangles:
            fh.write("f %d %d %d\n" % (f[0] + 1, f[1] + 1, f[2] + 1))


_STL_DT = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])


def read_stl(path, units: str = "m", clean: bool = True) -> TriangleMesh:
    """Read a binary STL; coincident vertices are merged."""
    with open(path, "rb") as fh:
        fh.read(80)
        head = fh.read(4)
        if len(head) < 4:
            raise FormatError(f"{path}: truncated STL header")
        (n,) = struct.unpack("<I", head)
        raw = fh.read()
    if len(raw) < n * _STL_DT.itemsize:
        raise FormatError(f"{path}: expected {n} facets, file is truncated (ASCII STL is not supported)")
    rec = np.frombuffer(raw[: n * _STL_DT.itemsize], dtype=_STL_DT)
    corners = rec["v"].astype(np.float64).reshape(-1, 3)
    uniq, inv = np.unique(corners, axis=0, return_inverse=True)
    mesh = TriangleMesh(uniq * _unit_scale(units), inv.reshape(-1, 3))
    return mesh.cleaned()[0] if clean else mesh


def write_stl(path, mesh: TriangleMesh) -> None:
    rec = np.zeros(len(mesh), dtype=_STL_DT)
    rec["normal"] = mesh.face_normals()
    rec["v"] = mesh.corners
    with open(path, "wb") as fh:
        fh.write(b"binary STL".ljust(80, b"\0"))
        fh.write(struct.pack("<I", len(mesh)))
        fh.write(rec.tobytes())


def read_mesh(path, units: str = "m") -> TriangleMesh:
    ext = Path(path).suffix.lower()
    if ext == ".obj":
        return read_obj(path, units)
    if ext == ".stl":
        return read_stl(path, units)
    raise FormatError(f"{path}: unsupported mesh format {ext}")


# ----------------------------------------------------------------------------
# Depth images

def read_pgm16(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval > 255 as uint16."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dt = ">u2" if maxval > 255 else "u1"
    arr = np.frombuffer(data, dtype=dt, count=w * h, offset=pos)
    return arr.reshape(h, w).astype(np.uint16)


def write_pgm16(path, image) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    if img.min(initial=0) < 0 or img.max(initial=0) > 65535:
        raise ValueError("values out of uint16 range")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(img.astype(">u2").tobytes())


def pose_to_json(pose: Pose6D) -> dict:
    return {"rotation": [float(x) for x in pose.rotation.ravel()],
            "translation": [float(x) for x in pose.translation]}


def pose_from_json(d: dict, where: str = "pose") -> Pose6D:
    try:
        R = np.asarray(d["rotation"], dtype=np.float64)
        t = np.asarray(d["translation"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{where}: expected rotation and translation ({exc})")
    if R.size != 9 or t.size != 3:
        raise FormatError(f"{where}: rotation needs 9 floats and translation 3")
    try:
        return Pose6D(R.reshape(3, 3), t)
    except ValueError as exc:
        raise FormatError(f"{where}.rotation: {exc}")


def write_view(directory, name: str, depth, intr: CameraIntrinsics, extrinsic: Pose6D,
               labels=None, fmt: str = "pgm") -> Path:
    """Store one depth view as image(s) plus a JSON sidecar; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    depth = np.asarray(depth, dtype=np.float64)
    side = {"width": intr.width, "height": intr.height, "fx": intr.fx, "fy": intr.fy,
            "cx": intr.cx, "cy": intr.cy, "extrinsic": pose_to_json(extrinsic)}
    if fmt == "pgm":
        write_pgm16(directory / f"{name}.pgm", np.round(depth * 1000.0).astype(np.int64))
        side.update(depth_file=f"{name}.pgm", depth_format="pgm16_mm")
    elif fmt == "f32":
        depth.astype("<f4").tofile(directory / f"{name}.f32")
        side.update(depth_file=f"{name}.f32", depth_format="float32_m")
    else:
        raise ValueError(f"unknown depth format {fmt}")
    if labels is not None:
        write_pgm16(directory / f"{name}_labels.pgm", np.asarray(labels))
        side["label_file"] = f"{name}_labels.pgm"
    path = directory / f"{name}.json"
    path.write_text(json.dumps(side, indent=2) + "\n")
    return path


def read_view(sidecar_path):
    """Load ``(depth_m, intrinsics, extrinsic, labels_or_None)`` from a sidecar."""
    sidecar_path = Path(sidecar_path)
    if not sidecar_path.exists():
        raise FileNotFoundError(f"intrinsics not found: {sidecar_path}")
    side = json.loads(sidecar_path.read_text())
    try:
        intr = CameraIntrinsics(float(side["fx"]), float(side["fy"]), float(side["cx"]),
                                float(side["cy"]), int(side["width"]), int(side["height"]))
        depth_file = sidecar_path.parent / side["depth_file"]
        fmt = side.get("depth_format", "pgm16_mm")
    except KeyError as exc:
        raise FormatError(f"{sidecar_path}: missing field {exc.args[0]}")
    extrinsic = pose_from_json(side["extrinsic"], f"{sidecar_path}:extrinsic") if "extrinsic" in side \
        else Pose6D()
    if fmt == "pgm16_mm":
        depth = read_pgm16(depth_file).astype(np.float64) / 1000.0
    elif fmt == "float32_m":
        depth = np.fromfile(depth_file, dtype="<f4").astype(np.float64)
        if depth.size != intr.width * intr.height:
            raise FormatError(f"{depth_file}: size does not match intrinsics")
        depth = depth.reshape(intr.height, intr.width)
    else:
        raise FormatError(f"{sidecar_path}: unknown depth_format {fmt}")
    labels = None
    if side.get("label_file"):
        labels = read_pgm16(sidecar_path.parent / side["label_file"]).astype(np.int64)
    return depth, intr, extrinsic, labels


# ----------------------------------------------------------------------------
# Scene files

def read_scene(path) -> SceneModel:
    """Load a scene.json; mesh paths are relative to the file.

    Schema: ``{objects: [{id, mesh_path, pose: {rotation[9], translation[3]},
    mass_kg, friction[, mesh_units]}], ground_plane: bool}``.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})")
    if not isinstance(doc, dict) or not isinstance(doc.get("objects"), list):
        raise FormatError("objects: expected a list")
    objs = []
    for i, o in enumerate(doc["objects"]):
        where = f"objects[{i}]"
        for key in ("id", "mesh_path", "pose", "mass_kg"):
            if key not in o:
                raise FormatError(f"{where}.{key}: missing")
        if not isinstance(o["id"], int) or o["id"] <= 0:
            raise FormatError(f"{where}.id: must be a positive integer")
        mass = o["mass_kg"]
        if not isinstance(mass, (int, float)) or not mass > 0:
            raise FormatError(f"{where}.mass_kg: must be > 0")
        fric = o.get("friction", 0.5)
        if not isinstance(fric, (int, float)) or not 0 <= fric <= 1:
            raise FormatError(f"{where}.friction: must lie in [0, 1]")
        mesh_path = path.parent / o["mesh_path"]
        if not mesh_path.exists():
            raise FormatError(f"{where}.mesh_path: file not found: {mesh_path}")
        units = o.get("mesh_units", "m")
        if units not in UNIT_SCALE:
            raise FormatError(f"{where}.mesh_units: unknown unit {units!r}")
        mesh = read_mesh(mesh_path, units)
        pose = pose_from_json(o["pose"], f"{where}.pose")
        objs.append(SceneObject(o["id"], mesh, pose, float(mass), float(fric), o["mesh_path"]))
    ids = [o.instance_id for o in objs]
    if len(set(ids)) != len(ids):
        raise FormatError("objects: duplicate id")
    gp = doc.get("ground_plane", True)
    if not isinstance(gp, bool):
        raise FormatError("ground_plane: must be a boolean")
    return SceneModel(tuple(objs), gp)


def write_scene(path, scene: SceneModel, mesh_dir: str = "meshes") -> None:
    """Write scene.json plus one OBJ per object (paths relative to the file)."""
    path = Path(path)
    (path.parent / mesh_dir).mkdir(parents=True, exist_ok=True)
    objects = []
    for o in scene.objects:
        rel = o.mesh_path or f"{mesh_dir}/object_{o.instance_id:03d}.obj"
        if not (path.parent / rel).exists() or o.mesh_path is None:
            write_obj(path.parent / rel, o.mesh)
        objects.append({"id": o.instance_id, "mesh_path": rel, "pose": pose_to_json(o.pose),
                        "mass_kg": o.mass, "friction": o.friction})
    path.write_text(json.dumps({"objects": objects, "ground_plane": scene.ground_plane},
                               indent=2) + "\n")


def list_views(directory) -> list[Path]:
    """Sorted sidecar paths of all views stored in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"view directory not found: {directory}")
    return sorted(p for p in directory.glob("*.json") if os.path.isfile(p))
