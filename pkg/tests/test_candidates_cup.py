import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suctiongrasp.candidates import (InsufficientNeighborsError, SamplerConfig, SuctionCandidate,
                                     darboux_frame, darboux_frames, generate_candidates,
                                     read_candidates, write_candidates)
from suctiongrasp.cup import (PRESETS, CupModel, cup_vertices, local_vertices,
                              perimeter_local_vertices, preset)
from suctiongrasp.geometry import PointCloud, PointIndex, Pose6D
from suctiongrasp.geometry.types import rotation_about_axis


def sphere_cloud(n, radius=0.05, seed=0, label=1, center=(0, 0, 0)):
    p = np.random.default_rng(seed).normal(size=(n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    return PointCloud(radius * p + center, p, np.full(n, label))


def cylinder_cloud(n, radius=0.03, height=0.1, seed=0, label=1):
    rng = np.random.default_rng(seed)
    th = rng.uniform(0, 2 * np.pi, n)
    z = rng.uniform(0, height, n)
    nrm = np.column_stack([np.cos(th), np.sin(th), np.zeros(n)])
    return PointCloud(np.column_stack([radius * nrm[:, :2], z]), nrm, np.full(n, label))


def plane_cloud(n, size=0.1, seed=0, label=1, z=0.0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-size / 2, size / 2, (n, 2))
    return PointCloud(np.column_stack([xy, np.full(n, z)]), np.tile([0, 0, 1.0], (n, 1)),
                      np.full(n, label))


def assert_rotation(R, tol=1e-6):
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=tol)
    assert abs(np.linalg.det(R) - 1) < tol


# --- frames -------------------------------------------------------------------------

def test_flat_patch_frame():
    pc = plane_cloud(400)
    R = darboux_frame(pc, 0, 0.015)
    np.testing.assert_allclose(R[:, 0], [0, 0, 1], atol=1e-12)
    assert abs(R[2, 1]) < 1e-12 and abs(R[2, 2]) < 1e-12
    assert_rotation(R)


def test_cylinder_frame_axis():
    pc = cylinder_cloud(4000)
    Rs, _, _ = darboux_frames(pc, np.arange(0, 4000, 40), 0.015)
    ang = np.degrees(np.arccos(np.clip(np.abs(Rs[:, 2, 2]), 0, 1)))
    assert np.all(ang < 5)


def test_sphere_frame_radial():
    pc = sphere_cloud(4000)
    Rs, _, _ = darboux_frames(pc, np.arange(0, 4000, 40), 0.015)
    radial = pc.points[np.arange(0, 4000, 40)] / 0.05
    cos = np.sum(Rs[:, :, 0] * radial, axis=1)
    assert np.all(cos > np.cos(np.radians(5)))


def test_insufficient_neighbors():
    pc = PointCloud(np.array([[0, 0, 0], [1, 0, 0.0]]), np.tile([0, 0, 1.0], (2, 1)), np.ones(2))
    with pytest.raises(InsufficientNeighborsError):
        darboux_frame(pc, 0, 0.015)


def test_isotropic_normals_fall_back_and_flag():
    # six axis normals give N = 2 I: all eigenvalues equal
    n = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1.0]])
    pc = PointCloud(np.zeros((6, 3)) + 1e-4 * np.arange(6)[:, None], n, np.ones(6, dtype=int))
    Rs, degenerate, _ = darboux_frames(pc, [4], 0.015)
    assert degenerate[0]
    np.testing.assert_allclose(Rs[0][:, 0], [0, 0, 1], atol=1e-12)
    assert_rotation(Rs[0])


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_frame_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    pc = cylinder_cloud(1500, seed=seed)
    q = rng.normal(size=3)
    R = rotation_about_axis(q, rng.uniform(0, 2 * np.pi))
    pose = Pose6D(R, rng.normal(size=3))
    idx = np.arange(0, 1500, 50)
    a, _, _ = darboux_frames(pc, idx, 0.015)
    b, _, _ = darboux_frames(pc.transformed(pose), idx, 0.015)
    np.testing.assert_allclose(b, R @ a, atol=1e-5)


# --- candidate generation ----------------------------------------------------------

def two_object_scene():
    a = sphere_cloud(800, center=(0.0, 0.0, 0.05), label=1)
    b = cylinder_cloud(900, seed=3, label=2)
    b = PointCloud(b.points + [0.2, 0, 0], b.normals, b.labels)
    g = plane_cloud(500, size=0.5, seed=4, label=0)
    return PointCloud(np.vstack([g.points, a.points, b.points]),
                      np.vstack([g.normals, a.normals, b.normals]),
                      np.concatenate([g.labels, a.labels, b.labels]))


def test_counts_per_object():
    cands = generate_candidates(two_object_scene(), SamplerConfig(100))
    assert len(cands) == 200
    assert [c.instance_id for c in cands].count(1) == 100
    assert [c.candidate_id for c in cands] == list(range(200))


def test_clamped_object_is_flagged():
    scene = two_object_scene()
    small = PointCloud(np.vstack([scene.points, [[1, 1, 0], [1, 1.001, 0], [1.001, 1, 0]]]),
                       np.vstack([scene.normals, np.tile([0, 0, 1.0], (3, 1))]),
                       np.concatenate([scene.labels, [3, 3, 3]]))
    cands = generate_candidates(small, SamplerConfig(100))
    mine = [c for c in cands if c.instance_id == 3]
    assert len(mine) == 3 and all("clamped" in c.flags for c in mine)


def test_requires_labels_and_normals():
    with pytest.raises(ValueError):
        generate_candidates(PointCloud(np.zeros((5, 3))))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000), k=st.integers(1, 60))
def test_candidate_invariants(seed, k):
    cloud = two_object_scene()
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(cloud))
    cloud = cloud.subset(perm)
    cands = generate_candidates(cloud, SamplerConfig(k))
    for inst in (1, 2):
        assert sum(c.instance_id == inst for c in cands) == min(k, int(np.sum(cloud.labels == inst)))
    for c in cands:
        R = c.pose.rotation
        assert_rotation(R)
        assert cloud.labels[c.contact_index] == c.instance_id != 0
        np.testing.assert_array_equal(cloud.points[c.contact_index], c.contact)
        assert np.dot(R[:, 0], cloud.normals[c.contact_index]) > 0


def test_fps_covers_better_than_random():
    cloud = sphere_cloud(2000, seed=11)
    cands = generate_candidates(cloud, SamplerConfig(40))
    chosen = np.array([c.contact_index for c in cands])
    idx = PointIndex(cloud)

    def cover(sel):
        d, _ = PointIndex(cloud.points[sel]).nearest(cloud.points)
        return d.max()

    fps_cover = cover(chosen)
    for trial in range(20):
        rnd = np.random.default_rng(trial).choice(len(cloud), 40, replace=False)
        assert fps_cover <= cover(rnd)
    assert len(idx) == 2000


def test_candidate_jsonl_roundtrip(tmp_path):
    cands = generate_candidates(two_object_scene(), SamplerConfig(5))
    write_candidates(tmp_path / "c.jsonl", cands)
    back = read_candidates(tmp_path / "c.jsonl")
    assert [c.to_json() for c in back] == [c.to_json() for c in cands]


def test_candidate_reader_names_missing_field(tmp_path):
    from suctiongrasp.geometry.io import FormatError
    (tmp_path / "c.jsonl").write_text('{"instance_id": 1, "contact_index": 0, "translation": [0,0,0]}\n')
    with pytest.raises(FormatError, match=r"c.jsonl:1.rotation: missing"):
        read_candidates(tmp_path / "c.jsonl")


def test_approach_pose_points_into_surface():
    c = SuctionCandidate(Pose6D(np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0.0]]), [0, 0, 0.1]), 1, 0)
    np.testing.assert_allclose(c.approach_pose().rotation[:, 0], [0, 0, -1])
    assert_rotation(c.approach_pose().rotation)


# --- cup ------------------------------------------------------------------------------

def test_presets():
    a, b = preset("cup_15mm"), preset("cup_25mm")
    assert (a.radius, a.force_limit) == (0.015, 20.0)
    assert (b.radius, b.force_limit) == (0.025, 30.0)
    assert set(PRESETS) == {"cup_15mm", "cup_25mm"}
    with pytest.raises(ValueError):
        preset("cup_99")


def test_cup_validation():
    for kw in ({"radius": 0}, {"rest_height": -1}, {"deformation_threshold": 1.0},
               {"force_limit": 0}, {"num_rings": 0}):
        with pytest.raises(ValueError):
            CupModel(**kw)


def test_vertex_layout():
    cup = CupModel()
    v = local_vertices(cup)
    assert v.shape == (960, 3) and cup.n_vertices == 960
    # outermost ring, first vertex
    assert any(np.allclose(p, [-0.020, 0.015, 0.0], atol=1e-15) for p in v)
    np.testing.assert_allclose(np.max(np.linalg.norm(v[:, 1:], axis=1)), cup.radius, atol=1e-9)
    np.testing.assert_allclose(np.min(np.linalg.norm(v[:, 1:], axis=1)), cup.radius / 15, atol=1e-12)
    assert np.all(v[:, 0] == -cup.rest_height)


def test_vertex_set_rotational_symmetry():
    v = local_vertices(CupModel())
    R = rotation_about_axis([1, 0, 0], 2 * np.pi / 64)
    w = v @ R.T
    d, _ = PointIndex(v).nearest(w)
    assert d.max() < 1e-9


def test_cup_vertices_equivariance(rng):
    cup = CupModel()
    pose = Pose6D(rotation_about_axis(rng.normal(size=3), 1.1), rng.normal(size=3))
    o, d = cup_vertices(cup, pose)
    np.testing.assert_allclose(o, pose.apply(local_vertices(cup)), atol=1e-12)
    np.testing.assert_allclose(d, np.tile(pose.rotation[:, 0], (960, 1)), atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)


def test_perimeter_vertices():
    cup = CupModel()
    p = perimeter_local_vertices(cup)
    assert p.shape == (8, 3)
    np.testing.assert_allclose(np.linalg.norm(p[:, 1:], axis=1), cup.radius)
