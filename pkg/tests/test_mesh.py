import numpy as np
import pytest
from scipy.stats import binom

from touchpose.errors import ParseError
from touchpose.mesh import (
    ContactCloud,
    MeshProximity,
    TriMesh,
    closest_on_triangles,
    closest_point_on_mesh,
    load_cloud,
    load_mesh,
    sample_contact_cloud,
    sample_mesh_surface,
    save_cloud,
    save_mesh,
)
from touchpose.objects import box_mesh, icosphere_mesh


def brute_closest_point_triangle(p, a, b, c, n=400):
    """Independent oracle: dense barycentric scan of one triangle."""
    best = None
    for i in range(n + 1):
        for j in range(n + 1 - i):
            u, v = i / n, j / n
            q = a + u * (b - a) + v * (c - a)
            d = np.linalg.norm(q - p)
            if best is None or d < best[0]:
                best = (d, q)
    return best


class TestClosestPoint:
    def test_on_face_distance_zero(self):
        m = box_mesh()
        q = np.array([0.0, 0.0, 0.06])
        _, d = closest_point_on_mesh(q, m)
        assert d == pytest.approx(0.0, abs=1e-12)

    def test_above_square(self):
        v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        f = np.array([[0, 1, 2], [0, 2, 3]])
        m = TriMesh(v, f)
        point, d = closest_point_on_mesh([0.25, 0.25, 1.0], m)
        assert d == pytest.approx(1.0)
        assert np.allclose(point, [0.25, 0.25, 0.0])

    def test_vertex_edge_interior_cases(self):
        a, b, c = np.array([0.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0.0, 1, 0])
        tri = TriMesh(np.array([a, b, c]), np.array([[0, 1, 2]]))
        # vertex region
        _, d = closest_point_on_mesh([-1.0, -1.0, 0.0], tri)
        assert d == pytest.approx(np.sqrt(2))
        # edge region
        _, d = closest_point_on_mesh([0.5, -1.0, 0.0], tri)
        assert d == pytest.approx(1.0)
        # interior
        _, d = closest_point_on_mesh([0.2, 0.2, 0.5], tri)
        assert d == pytest.approx(0.5)

    def test_against_scan_oracle(self):
        rng = np.random.default_rng(0)
        a, b, c = rng.normal(size=(3, 3))
        tri = np.stack([a, b, c])
        for _ in range(20):
            p = rng.normal(size=3) * 2
            got = closest_on_triangles(p[None], a[None], b[None], c[None])[0]
            d_scan, _ = brute_closest_point_triangle(p, a, b, c, n=300)
            assert np.linalg.norm(got - p) <= d_scan + 1e-4

    def test_matches_exhaustive_triangle_loop(self):
        # exhaustive per-face loop oracle on a small mesh
        mesh = icosphere_mesh(0.05, subdivisions=1)
        assert mesh.num_faces <= 200
        rng = np.random.default_rng(1)
        a, b, c = mesh.triangle_corners()
        for _ in range(50):
            q = rng.uniform(-0.1, 0.1, 3)
            best = np.inf
            for i in range(mesh.num_faces):
                cand = closest_on_triangles(q[None], a[i][None], b[i][None], c[i][None])[0]
                best = min(best, np.linalg.norm(cand - q))
            _, d = closest_point_on_mesh(q, mesh)
            assert d == pytest.approx(best, abs=1e-12)

    def test_empty_mesh_raises(self):
        m = TriMesh(np.zeros((3, 3)) + np.eye(3), np.zeros((0, 3), dtype=np.int64))
        with pytest.raises(ValueError):
            closest_point_on_mesh([0, 0, 0], m)


class TestProximity:
    def test_kdtree_path_matches_brute(self):
        mesh = icosphere_mesh(0.05, subdivisions=3)  # 1280 faces: KD path
        prox = MeshProximity(mesh)
        rng = np.random.default_rng(2)
        pts = rng.uniform(-0.08, 0.08, (64, 3))
        _, d, _ = prox.closest(pts)
        for i in range(len(pts)):
            _, want = closest_point_on_mesh(pts[i], mesh)
            assert d[i] == pytest.approx(want, abs=1e-12)

    def test_within_agrees_with_closest(self):
        mesh = box_mesh()
        prox = MeshProximity(mesh)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-0.1, 0.1, (200, 3))
        flags = prox.within(pts, 0.01)
        _, d, _ = prox.closest(pts)
        assert np.array_equal(flags, d < 0.01)


class TestSampling:
    def test_single_triangle_containment(self):
        v = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0]], dtype=float)
        m = TriMesh(v, np.array([[0, 1, 2]]))
        pts, nrm = sample_mesh_surface(m, 1000, 0)
        assert np.allclose(pts[:, 2], 0)
        # inside the triangle: x/2 + y <= 1, x,y >= 0
        assert (pts[:, 0] >= -1e-12).all() and (pts[:, 1] >= -1e-12).all()
        assert (pts[:, 0] / 2 + pts[:, 1] <= 1 + 1e-9).all()
        assert np.allclose(nrm, [0, 0, 1])

    def test_area_weighting_binomial(self):
        # two triangles, areas 1 and 3: per-face counts within 3 sigma
        v = np.array(
            [[0, 0, 0], [2, 0, 0], [0, 1, 0], [10, 0, 0], [16, 0, 0], [10, 1, 0]],
            dtype=float,
        )
        f = np.array([[0, 1, 2], [3, 4, 5]])
        m = TriMesh(v, f)
        n = 40_000
        pts, _ = sample_mesh_surface(m, n, 123)
        n_small = int((pts[:, 0] < 5).sum())
        mean = n * 0.25
        sigma = np.sqrt(n * 0.25 * 0.75)
        assert abs(n_small - mean) < 3 * sigma
        # cross-check the band against the binomial distribution itself
        assert binom.cdf(mean + 3 * sigma, n, 0.25) - binom.cdf(mean - 3 * sigma, n, 0.25) > 0.99

    def test_seed_determinism(self):
        m = box_mesh()
        p1, n1 = sample_mesh_surface(m, 500, 7)
        p2, n2 = sample_mesh_surface(m, 500, 7)
        assert np.array_equal(p1, p2) and np.array_equal(n1, n2)

    def test_bad_args(self):
        m = box_mesh()
        with pytest.raises(ValueError):
            sample_mesh_surface(m, 0, 0)
        empty = TriMesh(np.eye(3), np.zeros((0, 3), dtype=np.int64))
        with pytest.raises(ValueError):
            sample_mesh_surface(empty, 10, 0)


class TestMeshType:
    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            TriMesh(np.eye(3), np.array([[0, 1, 3]]))

    def test_degenerate_face_rejected(self):
        v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
        with pytest.raises(ValueError):
            TriMesh(v, np.array([[0, 1, 2]]))

    def test_face_normals_unit(self):
        m = icosphere_mesh()
        assert np.allclose(np.linalg.norm(m.face_normals, axis=1), 1.0, atol=1e-12)

    def test_immutable(self):
        m = box_mesh()
        with pytest.raises(ValueError):
            m.vertices[0, 0] = 9.0


class TestObjIO:
    def test_cube_roundtrip(self, tmp_path):
        m = box_mesh()
        path = tmp_path / "cube.obj"
        save_mesh(m, path)
        back = load_mesh(path)
        assert back.num_vertices == 8 and back.num_faces == 12
        assert np.allclose(back.vertices, m.vertices, atol=1e-9)
        assert np.array_equal(back.faces, m.faces)

    def test_one_based_guard(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")
        with pytest.raises(ParseError) as err:
            load_mesh(path)
        assert err.value.line == 4

    def test_bad_vertex(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0\n")
        with pytest.raises(ParseError) as err:
            load_mesh(path)
        assert err.value.line == 1

    def test_polygon_fan_and_slashes(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n# comment\no name\n"
        )
        m = load_mesh(path)
        assert m.num_faces == 2

    def test_normals_recomputed_from_winding(self, tmp_path):
        path = tmp_path / "tri.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        m = load_mesh(path)
        assert np.allclose(m.face_normals[0], [0, 0, 1])


class TestCloudIO:
    def test_roundtrip(self, tmp_path):
        cloud = sample_contact_cloud(box_mesh(), 100, 11, step=3)
        path = tmp_path / "c.ply"
        save_cloud(cloud, path)
        back = load_cloud(path)
        assert np.allclose(back.points, cloud.points, atol=1e-9)
        assert np.allclose(back.normals, cloud.normals, atol=1e-9)
        assert np.array_equal(back.steps, cloud.steps)

    def test_missing_property(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\n"
            "property double y\nproperty double z\nend_header\n0 0 0\n"
        )
        with pytest.raises(ParseError):
            load_cloud(path)

    def test_wrong_count(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            + "".join(f"property double {n}\n" for n in ("x", "y", "z", "nx", "ny", "nz"))
            + "end_header\n0 0 0 0 0 1\n"
        )
        with pytest.raises(ParseError):
            load_cloud(path)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            ContactCloud(np.zeros((2, 3)), np.zeros((1, 3)), np.zeros(2, dtype=np.int64))

    def test_extended(self):
        c = ContactCloud()
        c2 = c.extended([[0, 0, 0]], [[0, 0, 1]], step=5)
        assert len(c2) == 1 and c2.steps[0] == 5 and len(c) == 0
