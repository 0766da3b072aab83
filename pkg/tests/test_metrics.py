import numpy as np
import pytest

from touchpose.geometry import RigidTransform, random_rotation, rot_z
from touchpose.mesh import sample_mesh_surface
from touchpose.objects import cylinder_mesh, get_object, icosphere_mesh
from touchpose.recon.metrics import (
    add_s,
    add_s_distances,
    auc_add_s,
    coverage_iou,
    coverage_iou_mesh,
)

IDENT = RigidTransform.identity()


class TestAddS:
    def test_zero_at_ground_truth(self):
        pts, _ = sample_mesh_surface(get_object("cuboid"), 500, 0)
        rng = np.random.default_rng(0)
        pose = RigidTransform(random_rotation(rng), rng.uniform(-0.1, 0.1, 3))
        assert add_s(pose, pose, pts) == pytest.approx(0.0, abs=1e-12)

    def test_single_point_pure_translation(self):
        pts = np.array([[0.0, 0.0, 0.0]])
        est = RigidTransform.from_translation([0.03, 0.04, 0.0])
        assert add_s(est, IDENT, pts) == pytest.approx(0.05)

    def test_cylinder_axis_rotation_symmetric(self):
        # dense-sample closest-point oracle: rotation about the symmetry
        # axis leaves the ADD-S essentially zero
        cyl = cylinder_mesh(radius=0.035, height=0.12, segments=96)
        pts, _ = sample_mesh_surface(cyl, 10_000, 1)
        est = RigidTransform(rot_z(0.7), np.zeros(3))
        assert add_s(est, IDENT, pts) < 1e-6 * 1000  # relaxed: finite sampling
        assert add_s(est, IDENT, pts) < 2e-3

    def test_empty_sample_raises(self):
        with pytest.raises(ValueError):
            add_s(IDENT, IDENT, np.zeros((0, 3)))


class TestAuc:
    def test_perfect_is_one(self):
        pts, _ = sample_mesh_surface(get_object("sphere"), 200, 0)
        assert auc_add_s(IDENT, IDENT, pts) == pytest.approx(1.0)

    def test_all_beyond_dmax_is_zero(self):
        pts = np.array([[0.0, 0.0, 0.0]])
        est = RigidTransform.from_translation([1.0, 0, 0])
        assert auc_add_s(est, IDENT, pts, d_max=0.1) == 0.0

    def test_half_distance_gives_half(self):
        pts = np.array([[0.0, 0.0, 0.0]])
        est = RigidTransform.from_translation([0.05, 0, 0])
        assert auc_add_s(est, IDENT, pts, d_max=0.1) == pytest.approx(0.5)

    def test_matches_threshold_sweep_oracle(self):
        rng = np.random.default_rng(2)
        pts, _ = sample_mesh_surface(get_object("corner"), 300, 3)
        est = RigidTransform(random_rotation(rng), rng.uniform(-0.05, 0.05, 3))
        d = add_s_distances(est, IDENT, pts)
        taus = np.linspace(0, 0.1, 20001)
        acc = (d[None, :] <= taus[:, None]).mean(axis=1)
        oracle = np.trapezoid(acc, taus) / 0.1
        assert auc_add_s(est, IDENT, pts, 0.1) == pytest.approx(oracle, abs=1e-4)

    def test_monotone_under_inflation(self):
        rng = np.random.default_rng(3)
        pts, _ = sample_mesh_surface(get_object("cuboid"), 300, 4)
        prev = None
        for scale in (0.0, 0.01, 0.02, 0.05, 0.1, 0.2):
            est = RigidTransform.from_translation([scale, 0, 0])
            v = auc_add_s(est, IDENT, pts)
            assert 0.0 <= v <= 1.0
            if prev is not None:
                assert v <= prev + 1e-12
            prev = v

    def test_sample_order_permutation_invariant(self):
        rng = np.random.default_rng(4)
        pts, _ = sample_mesh_surface(get_object("edge"), 400, 5)
        est = RigidTransform(random_rotation(rng), rng.uniform(-0.02, 0.02, 3))
        a = auc_add_s(est, IDENT, pts)
        b = auc_add_s(est, IDENT, pts[rng.permutation(len(pts))])
        assert a == pytest.approx(b, abs=1e-12)

    def test_bad_dmax(self):
        with pytest.raises(ValueError):
            auc_add_s(IDENT, IDENT, np.zeros((1, 3)), d_max=0.0)


class TestIoU:
    def test_identical_clouds_one(self):
        pts, _ = sample_mesh_surface(get_object("sphere"), 1000, 0)
        assert coverage_iou(pts, pts, 0.01) == 1.0

    def test_empty_contacts_zero(self):
        pts, _ = sample_mesh_surface(get_object("sphere"), 100, 0)
        assert coverage_iou(np.zeros((0, 3)), pts, 0.01) == 0.0

    def test_disjoint_zero(self):
        a = np.array([[0.0, 0, 0]])
        b = np.array([[1.0, 1, 1]])
        assert coverage_iou(a, b, 0.01) == 0.0

    def test_never_exceeds_one_and_exact_set_arithmetic(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(-0.05, 0.05, (300, 3))
        b = rng.uniform(-0.05, 0.05, (300, 3))
        cell = 0.02
        got = coverage_iou(a, b, cell)
        ca = {tuple(np.floor(p / cell).astype(int)) for p in a}
        cb = {tuple(np.floor(p / cell).astype(int)) for p in b}
        assert got == pytest.approx(len(ca & cb) / len(ca | cb))
        assert 0.0 <= got <= 1.0

    def test_hemisphere_half_coverage(self):
        # analytic oracle: covering one hemisphere of a dense sphere
        # sample gives IoU near the covered cell fraction (~0.5)
        sphere = icosphere_mesh(0.05, 3)
        surf, _ = sample_mesh_surface(sphere, 20_000, 6)
        upper = surf[surf[:, 2] > 0]
        iou = coverage_iou(upper, surf, 0.01)
        assert 0.4 <= iou <= 0.6

    def test_mesh_helper(self):
        mesh = get_object("sphere")
        pose = RigidTransform.from_translation([0.05, 0, 0])
        surf, _ = sample_mesh_surface(mesh, 4000, 0)
        assert coverage_iou_mesh(pose.apply(surf), mesh, pose, 0.01, 4000, 0) == 1.0

    def test_bad_cell(self):
        with pytest.raises(ValueError):
            coverage_iou(np.zeros((1, 3)), np.zeros((1, 3)), 0.0)
