import itertools
from collections import Counter

import numpy as np
import pytest

from touchpose.errors import ReconstructionFailed
from touchpose.mesh import sample_mesh_surface
from touchpose.objects import icosphere_mesh
from touchpose.recon.bpa import ball_pivot_reconstruct, default_pivot_radii, mean_spacing


def edge_face_counts(mesh):
    cnt = Counter()
    for f in mesh.faces:
        for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            cnt[tuple(sorted(e))] += 1
    return cnt


def brute_force_empty_ball_faces(points, radius):
    """Oracle: all triples whose outward ball of the radius is empty."""
    n = len(points)
    center_of_mass = points.mean(axis=0)
    ok = []
    for i, j, k in itertools.combinations(range(n), 3):
        a, b, c = points[i], points[j], points[k]
        nrm = np.cross(b - a, c - a)
        if np.linalg.norm(nrm) < 1e-12:
            continue
        nrm = nrm / np.linalg.norm(nrm)
        if np.dot(nrm, (a + b + c) / 3 - center_of_mass) < 0:
            nrm = -nrm  # outward side
        ab, ac = b - a, c - a
        d11, d22, d12 = ab @ ab, ac @ ac, ab @ ac
        denom = 2 * (d11 * d22 - d12 * d12)
        cc = a + (d22 * (d11 - d12) / denom) * ab + (d11 * (d22 - d12) / denom) * ac
        rc2 = (cc - a) @ (cc - a)
        if rc2 > radius * radius:
            continue
        center = cc + np.sqrt(radius * radius - rc2) * nrm
        dists = np.linalg.norm(points - center, axis=1)
        inside = dists < radius * (1 - 1e-9)
        inside[[i, j, k]] = False
        if not inside.any():
            ok.append((i, j, k))
    return ok


class TestTetrahedron:
    def test_four_faces_closed(self):
        pts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float) * 0.05
        nrm = pts / np.linalg.norm(pts, axis=1)[:, None]
        mesh = ball_pivot_reconstruct(pts, nrm, [1.0])
        assert mesh.num_faces == 4
        counts = edge_face_counts(mesh)
        assert len(counts) == 6
        assert all(c == 2 for c in counts.values())
        # oracle agreement: every face triple is empty-ball valid
        valid = {tuple(sorted(t)) for t in brute_force_empty_ball_faces(pts, 1.0)}
        assert valid == {(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)}
        for f in mesh.faces:
            assert tuple(sorted(f.tolist())) in valid

    def test_outward_normals(self):
        pts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float) * 0.05
        nrm = pts / np.linalg.norm(pts, axis=1)[:, None]
        mesh = ball_pivot_reconstruct(pts, nrm, [1.0])
        out = np.einsum("ij,ij->i", mesh.face_normals, mesh.face_centroids())
        assert (out > 0).all()


class TestDegenerate:
    def test_collinear_raises(self):
        pts = np.array([[0, 0, 0], [0.01, 0, 0], [0.02, 0, 0]], float)
        nrm = np.tile([0.0, 0, 1.0], (3, 1))
        with pytest.raises(ReconstructionFailed):
            ball_pivot_reconstruct(pts, nrm, [0.05])

    def test_too_few_points(self):
        with pytest.raises(ReconstructionFailed):
            ball_pivot_reconstruct(np.zeros((2, 3)), np.tile([0, 0, 1.0], (2, 1)), [0.1])

    def test_radius_too_small(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
        nrm = np.tile([0.0, 0, 1.0], (4, 1))
        with pytest.raises(ReconstructionFailed):
            ball_pivot_reconstruct(pts, nrm, [0.01])

    def test_bad_args(self):
        pts = np.zeros((4, 3))
        with pytest.raises(ValueError):
            ball_pivot_reconstruct(pts, np.zeros((3, 3)), [0.1])
        with pytest.raises(ValueError):
            ball_pivot_reconstruct(pts, np.zeros((4, 3)), [])


@pytest.fixture(scope="module")
def sphere_recon():
    sph = icosphere_mesh(0.05)
    pts, nrm = sample_mesh_surface(sph, 500, 42)
    mesh = ball_pivot_reconstruct(pts, nrm, default_pivot_radii(pts))
    return pts, mesh


class TestSphere:

    def test_vertex_usage(self, sphere_recon):
        pts, mesh = sphere_recon
        used = np.unique(mesh.faces).size
        assert used / len(pts) >= 0.85

    def test_edge_manifold(self, sphere_recon):
        _, mesh = sphere_recon
        assert max(edge_face_counts(mesh).values()) <= 2

    def test_vertices_are_input_points(self, sphere_recon):
        pts, mesh = sphere_recon
        assert np.array_equal(mesh.vertices, pts)
        assert mesh.faces.max() < len(pts)

    def test_face_normals_near_analytic(self, sphere_recon):
        _, mesh = sphere_recon
        cen = mesh.face_centroids()
        analytic = cen / np.linalg.norm(cen, axis=1)[:, None]
        dots = np.einsum("ij,ij->i", mesh.face_normals, analytic)
        ang = np.degrees(np.arccos(np.clip(dots, -1, 1)))
        assert ang.max() <= 30.0

    def test_multi_radius_improves_or_keeps_coverage(self):
        sph = icosphere_mesh(0.05)
        pts, nrm = sample_mesh_surface(sph, 400, 7)
        s = mean_spacing(pts)
        single = ball_pivot_reconstruct(pts, nrm, [1.5 * s])
        multi = ball_pivot_reconstruct(pts, nrm, [1.5 * s, 3 * s, 6 * s])
        assert np.unique(multi.faces).size >= np.unique(single.faces).size

    def test_determinism(self):
        sph = icosphere_mesh(0.05)
        pts, nrm = sample_mesh_surface(sph, 300, 3)
        radii = default_pivot_radii(pts)
        a = ball_pivot_reconstruct(pts, nrm, radii)
        b = ball_pivot_reconstruct(pts, nrm, radii)
        assert np.array_equal(a.faces, b.faces)


class TestSpacing:
    def test_grid_spacing(self):
        xs = np.arange(5) * 0.01
        pts = np.array([[x, y, 0.0] for x in xs for y in xs])
        assert mean_spacing(pts) == pytest.approx(0.01)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            mean_spacing(np.zeros((1, 3)))
