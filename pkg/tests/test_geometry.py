import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from suctiongrasp.geometry import (CameraIntrinsics, PointCloud, PointIndex, Pose6D, SceneModel,
                                   SceneObject, TriangleMesh, ball_query, depth_to_pointcloud,
                                   estimate_normals, farthest_point_sampling, merge_views,
                                   project_points, sample_mesh_surface)
from suctiongrasp.geometry.primitives import box_mesh, cylinder_mesh, sphere_mesh
from suctiongrasp.geometry.types import look_at, orthonormal_completion


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                     [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                     [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])


# --- value types -------------------------------------------------------------

def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose6D(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        Pose6D(2 * np.eye(3))


def test_pose_compose_and_inverse(rng):
    a = Pose6D(random_rotation(rng), rng.normal(size=3))
    b = Pose6D(random_rotation(rng), rng.normal(size=3))
    p = rng.normal(size=(5, 3))
    np.testing.assert_allclose((a @ b).apply(p), a.apply(b.apply(p)), atol=1e-12)
    np.testing.assert_allclose(a.inverse().apply(a.apply(p)), p, atol=1e-12)


def test_pointcloud_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 3)), normals=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((2, 3)), normals=np.array([[0, 0, 2.0], [0, 0, 1.0]]))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((2, 3)), labels=np.array([0, -1]))


def test_pointcloud_is_read_only():
    pc = PointCloud(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        pc.points[0, 0] = 1.0


def test_scene_validation():
    box = box_mesh((0.1, 0.1, 0.1))
    with pytest.raises(ValueError):
        SceneModel((SceneObject(1, box), SceneObject(1, box)))
    with pytest.raises(ValueError):
        SceneObject(1, box, mass=0.0)
    with pytest.raises(ValueError):
        SceneObject(1, box, friction=1.5)
    with pytest.raises(KeyError):
        SceneModel((SceneObject(1, box),)).get(7)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0, 100, 10, 10, 20, 20)
    with pytest.raises(ValueError):
        CameraIntrinsics(100, 100, 20, 10, 20, 20)


def test_mesh_cleaning_drops_degenerate_faces():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0.0]])
    mesh, dropped = TriangleMesh(v, np.array([[0, 1, 2], [0, 1, 3]])).cleaned()
    assert dropped == 1 and len(mesh.triangles) == 1


def test_mesh_index_out_of_range():
    with pytest.raises(ValueError):
        TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 3]]))


@pytest.mark.parametrize("mesh,area", [
    (box_mesh((0.1, 0.2, 0.3)), 2 * (0.02 + 0.03 + 0.06)),
    (cylinder_mesh(0.05, 0.1, 256), 2 * np.pi * 0.05 * 0.1 + 2 * np.pi * 0.05 ** 2),
    (sphere_mesh(0.05, 96, 192), 4 * np.pi * 0.05 ** 2),
])
def test_primitive_area_and_centroid(mesh, area):
    assert mesh.area() == pytest.approx(area, rel=2e-3)
    np.testing.assert_allclose(mesh.centroid(), 0.0, atol=1e-12)
    # outward orientation: every face normal points away from the center
    c = mesh.corners.mean(axis=1)
    assert np.all(np.sum(mesh.face_normals() * c, axis=1) > 0)


def test_orthonormal_completion_first_column(rng):
    for _ in range(20):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        R = orthonormal_completion(n)
        np.testing.assert_allclose(R[:, 0], n, atol=1e-12)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)


# --- ball query and kNN ---------------------------------------------------------

def test_ball_query_example():
    idx = PointIndex(np.array([[0, 0, 0], [0.01, 0, 0], [1, 0, 0.0]]))
    assert set(ball_query(idx, [0, 0, 0], 0.015)) == {0, 1}
    assert len(ball_query(idx, [0.5, 0.5, 0.5], 0.1)) == 0
    with pytest.raises(ValueError):
        ball_query(idx, [0, 0, 0], 0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), radius=st.floats(0.01, 0.5))
def test_ball_query_matches_scan(seed, radius):
    rng = np.random.default_rng(seed)
    pts = rng.random((300, 3))
    idx = PointIndex(pts)
    c = rng.random(3)
    assert set(idx.ball_query(c, radius).tolist()) == oracles.ball(pts, c, radius)


def test_nearest_matches_scan(rng):
    pts = rng.random((500, 3))
    q = rng.random((50, 3))
    d, i = PointIndex(pts).nearest(q)
    full = np.linalg.norm(q[:, None] - pts[None], axis=2)
    np.testing.assert_array_equal(i, full.argmin(axis=1))
    np.testing.assert_allclose(d, full.min(axis=1))


# --- farthest point sampling -----------------------------------------------------

def test_fps_collinear_examples():
    pts = np.column_stack([np.arange(11.0), np.zeros(11), np.zeros(11)])
    assert list(farthest_point_sampling(pts, 2)) == [0, 10]
    assert list(farthest_point_sampling(pts, 3)) == [0, 10, 5]


def test_fps_range_errors():
    pts = np.zeros((5, 3))
    for k in (0, 6):
        with pytest.raises(ValueError):
            farthest_point_sampling(pts, k)
    with pytest.raises(ValueError):
        farthest_point_sampling(pts, 2, seed_index=5)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 20), start=st.integers(0, 199))
def test_fps_matches_greedy_oracle(seed, k, start):
    pts = np.random.default_rng(seed).random((200, 3))
    assert list(farthest_point_sampling(pts, k, start)) == oracles.fps(pts, k, start)


def test_fps_ties_take_lowest_index():
    # a lattice has many equal distances
    g = np.stack(np.meshgrid(np.arange(4.0), np.arange(4.0), [0.0]), -1).reshape(-1, 3)
    assert list(farthest_point_sampling(g, 8)) == oracles.fps(g, 8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(2, 25))
def test_fps_two_approximation_property(seed, k):
    pts = np.random.default_rng(seed).random((250, 3))
    sel = farthest_point_sampling(pts, k)
    s = pts[sel]
    pair = np.linalg.norm(s[:, None] - s[None], axis=2)
    min_pair = pair[~np.eye(k, dtype=bool)].min()
    cover = np.linalg.norm(pts[:, None] - s[None], axis=2).min(axis=1).max()
    assert min_pair >= cover - 1e-12


# --- normals --------------------------------------------------------------------

def test_normals_plane():
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.random(100), rng.random(100), np.zeros(100)])
    pc = estimate_normals(PointCloud(pts), k=10, viewpoint=(0, 0, 1))
    np.testing.assert_allclose(pc.normals, np.tile([0, 0, 1.0], (100, 1)), atol=1e-9)


def test_normals_sphere_within_5deg():
    rng = np.random.default_rng(2)
    p = rng.normal(size=(3000, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    pc = estimate_normals(PointCloud(p), k=15, viewpoint=(0, 0, 0))
    # flipped toward the origin, so the normals point inward here
    cos = np.sum(pc.normals * -p, axis=1)
    assert np.all(cos > np.cos(np.radians(5)))


def test_normals_errors():
    with pytest.raises(ValueError, match="too few points"):
        estimate_normals(PointCloud(np.zeros((2, 3))), k=3)
    with pytest.raises(ValueError):
        estimate_normals(PointCloud(np.random.default_rng(0).random((20, 3))), k=2)


# --- mesh surface sampling ------------------------------------------------------

def test_sample_mesh_unit_square_density():
    sq = TriangleMesh(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0.0]]),
                      np.array([[0, 1, 2], [0, 2, 3]]))
    p = sample_mesh_surface(sq, 10_000, rng_seed=3).points
    lower = np.mean(p[:, 0] >= p[:, 1])
    assert abs(lower - 0.5) <= 0.05 * 0.5


def test_sample_mesh_area_weighting_uneven():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [3, 0, 0], [3, 3, 0.0]])
    mesh = TriangleMesh(v, np.array([[0, 1, 2], [0, 2, 3], [1, 4, 5]]))
    n = 20_000
    p = sample_mesh_surface(mesh, n, rng_seed=4).points
    areas = mesh.face_areas() / mesh.area()
    frac = np.array([np.mean((p[:, 0] <= 1) & (p[:, 0] >= p[:, 1])),
                     np.mean((p[:, 0] <= 1) & (p[:, 0] < p[:, 1])),
                     np.mean(p[:, 0] > 1)])
    sigma = np.sqrt(areas * (1 - areas) / n)
    assert np.all(np.abs(frac - areas) < 4 * sigma)


def test_sample_mesh_single_and_errors():
    tri = TriangleMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), np.array([[0, 1, 2]]))
    p = sample_mesh_surface(tri, 1).points[0]
    assert p[0] >= 0 and p[1] >= 0 and p[0] + p[1] <= 1 and p[2] == 0
    with pytest.raises(ValueError):
        sample_mesh_surface(tri, 0)
    a = sample_mesh_surface(tri, 50, rng_seed=9)
    b = sample_mesh_surface(tri, 50, rng_seed=9)
    np.testing.assert_array_equal(a.points, b.points)


# --- camera -----------------------------------------------------------------------

def test_backprojection_examples():
    intr = CameraIntrinsics(100, 100, 0, 0, 200, 10)
    depth = np.zeros((10, 200))
    depth[0, 0] = 1.0
    depth[0, 100] = 2.0
    pc = depth_to_pointcloud(depth, intr)
    got = {tuple(np.round(p, 12)) for p in pc.points}
    assert got == {(0.0, 0.0, 1.0), (2.0, 0.0, 2.0)}
    assert len(depth_to_pointcloud(np.zeros((10, 200)), intr)) == 0
    with pytest.raises(ValueError):
        depth_to_pointcloud(np.zeros((5, 5)), intr)


def test_backprojection_roundtrip(rng):
    intr = CameraIntrinsics(300, 320, 79.5, 59.5, 160, 120)
    pose = look_at([0.4, -0.2, 0.6], [0, 0, 0])
    depth = rng.uniform(0.3, 1.5, size=(120, 160))
    pc = depth_to_pointcloud(depth, intr, pose)
    u, v, z = project_points(pc.points, intr, pose)
    vv, uu = np.nonzero(depth > 0)
    np.testing.assert_allclose(u, uu, atol=1e-9)
    np.testing.assert_allclose(v, vv, atol=1e-9)
    np.testing.assert_allclose(z, depth[vv, uu], atol=1e-9)


def test_merge_views_examples(rng):
    pts = rng.random((200, 3))
    pc = PointCloud(pts, labels=np.ones(200, dtype=np.int64))
    assert len(merge_views([pc, pc], voxel=0.001)) == len(merge_views([pc], voxel=0.001))
    other = PointCloud(pts + 5.0, labels=np.ones(200, dtype=np.int64))
    assert len(merge_views([pc, other], voxel=0.0)) == 400
    with pytest.raises(ValueError):
        merge_views([])


def test_merge_views_majority_label():
    p = np.array([[0.0001, 0.0001, 0.0001]] * 3)
    pc = merge_views([PointCloud(p, labels=np.array([2, 3, 3]))], voxel=0.01)
    assert pc.labels.tolist() == [3]


def test_three_views_cover_box():
    from suctiongrasp.geometry.bvh import SceneIndex
    from suctiongrasp.geometry.camera import render_depth

    box = box_mesh((0.1, 0.1, 0.1))
    scene = SceneModel((SceneObject(1, box, Pose6D(translation=[0, 0, 0.05])),), ground_plane=False)
    index = SceneIndex(scene)
    intr = CameraIntrinsics.from_fov(320, 240, 50)
    clouds = []
    # three azimuths 120 degrees apart see all four sides and the top
    for az in np.radians([45.0, 165.0, 285.0]):
        pose = look_at([0.45 * np.cos(az), 0.45 * np.sin(az), 0.35], [0, 0, 0.05])
        depth, labels = render_depth(index, intr, pose)
        clouds.append(depth_to_pointcloud(depth, intr, pose, labels))
    merged = merge_views(clouds, voxel=0.002)
    ref = sample_mesh_surface(scene.objects[0].world_mesh(), 5000, rng_seed=0)
    visible = ref.points[:, 2] > 1e-9   # the bottom face is never visible
    d, _ = PointIndex(merged).nearest(ref.points[visible])
    assert np.mean(d <= 0.002) >= 0.95
