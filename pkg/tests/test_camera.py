import numpy as np
import pytest

from touchpose.errors import ParseError
from touchpose.geometry import RigidTransform, normalized
from touchpose.recon.camera import (
    CameraIntrinsics,
    DepthImage,
    backproject_depth,
    generate_viewpoints,
    load_pgm,
    render_depth,
    save_pgm,
    visibility_filter,
)

K = CameraIntrinsics(fx=100.0, fy=100.0, cx=64.0, cy=64.0, width=128, height=128)


def render_oracle(points, intr, splat):
    """Brute-force per-point, per-pixel z-buffer with the same splat rule."""
    depth = {}
    for p in points:
        x, y, z = p
        if z <= 0:
            continue
        u = int(round(intr.fx * x / z + intr.cx))
        v = int(round(intr.fy * y / z + intr.cy))
        for du in range(-splat, splat + 1):
            for dv in range(-splat, splat + 1):
                if du * du + dv * dv > splat * splat:
                    continue
                uu, vv = u + du, v + dv
                if 0 <= uu < intr.width and 0 <= vv < intr.height:
                    key = (vv, uu)
                    if key not in depth or z < depth[key]:
                        depth[key] = z
    img = np.zeros((intr.height, intr.width))
    for (v, u), z in depth.items():
        img[v, u] = z
    return img


class TestViewpoints:
    def test_single_pose_at_start(self):
        start = np.array([0.0, 0.0, -0.14])
        center = np.zeros(3)
        (pose,) = generate_viewpoints(start, center, 1, np.pi / 3)
        assert np.allclose(pose.translation, start, atol=1e-9)
        # +z column is the viewing direction and passes through the center
        assert np.allclose(pose.rotation[:, 2], normalized(center - start), atol=1e-9)

    def test_axes_pass_through_center(self):
        start = np.array([0.03, -0.05, -0.12])
        center = np.array([0.01, 0.0, 0.0])
        for pose in generate_viewpoints(start, center, 9, np.pi / 3):
            z = pose.rotation[:, 2]
            offset = center - pose.translation
            # distance from center to the optical-axis line
            line_pt = pose.translation + z * (offset @ z)
            assert np.linalg.norm(line_pt - center) < 1e-9
            # radius preserved
            assert np.linalg.norm(offset) == pytest.approx(np.linalg.norm(start - center))

    def test_fibonacci_spacing(self):
        start = np.array([0.0, 0.0, -0.14])
        poses = generate_viewpoints(start, np.zeros(3), 42, np.pi / 3)
        dirs = np.array([normalized(p.translation) for p in poses])
        # spherical-code oracle: nearest-neighbor angular gap within 2x the
        # even-spacing value for this cap area
        cap_area = 2 * np.pi * (1 - np.cos(np.pi / 3))
        ideal = np.sqrt(cap_area / len(dirs))
        cosines = np.clip(dirs @ dirs.T, -1, 1)
        np.fill_diagonal(cosines, -1)
        nn_gap = np.arccos(cosines.max(axis=1))
        assert nn_gap.max() <= 2 * ideal
        assert nn_gap.min() >= ideal / 4

    def test_bad_count(self):
        with pytest.raises(ValueError):
            generate_viewpoints([0, 0, -1], [0, 0, 0], 0, 1.0)


class TestVisibility:
    def test_facing_kept(self):
        view = RigidTransform.identity()
        out = visibility_filter([[0, 0, 1.0]], [[0, 0, -1.0]], view)
        assert len(out) == 1

    def test_back_facing_dropped(self):
        out = visibility_filter([[0, 0, 1.0]], [[0, 0, 1.0]], RigidTransform.identity())
        assert len(out) == 0

    def test_exact_zero_dropped(self):
        out = visibility_filter([[0, 0, 1.0]], [[1.0, 0, 0]], RigidTransform.identity())
        assert len(out) == 0

    def test_transformed_frame(self):
        # camera at z=-1 looking +z: a point at the origin with normal -z faces it
        view = RigidTransform(np.eye(3), [0, 0, -1.0])
        out = visibility_filter([[0, 0, 0.0]], [[0, 0, -1.0]], view)
        assert len(out) == 1
        assert np.allclose(out[0], [0, 0, 1.0])


class TestRenderDepth:
    def test_center_pixel(self):
        img = render_depth([[0, 0, 0.5]], K, splat_radius=0)
        assert img.depth[64, 64] == pytest.approx(0.5)
        assert (img.depth > 0).sum() == 1

    def test_zbuffer_keeps_near(self):
        img = render_depth([[0, 0, 0.5], [0, 0, 0.7]], K, splat_radius=0)
        assert img.depth[64, 64] == pytest.approx(0.5)

    def test_behind_camera_skipped(self):
        img = render_depth([[0, 0, -0.1]], K, splat_radius=1)
        assert (img.depth == 0).all()

    def test_splat_radius_one_is_plus_pattern(self):
        img = render_depth([[0, 0, 0.5]], K, splat_radius=1)
        assert (img.depth > 0).sum() == 5
        assert img.depth[63, 64] > 0 and img.depth[64, 63] > 0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            pts = np.column_stack(
                [rng.uniform(-0.3, 0.3, 200), rng.uniform(-0.3, 0.3, 200),
                 rng.uniform(-0.2, 1.0, 200)]
            )
            img = render_depth(pts, K, splat_radius=1)
            oracle = render_oracle(pts, K, 1)
            assert np.array_equal(img.depth, oracle)

    def test_backprojection_roundtrip(self):
        rng = np.random.default_rng(1)
        pts = np.column_stack(
            [rng.uniform(-0.1, 0.1, 50), rng.uniform(-0.1, 0.1, 50),
             rng.uniform(0.3, 0.8, 50)]
        )
        img = render_depth(pts, K, splat_radius=0)
        back = backproject_depth(img, K)
        # every back-projected point is within a pixel-quantization bound
        # of some input point
        for q in back:
            d = np.linalg.norm(pts - q, axis=1).min()
            assert d < 0.9 * q[2] / K.fx + 1e-9

    def test_backproject_into_base_frame(self):
        view = RigidTransform(np.eye(3), [0.0, 0.0, -1.0])
        img = render_depth([[0, 0, 1.0]], K, splat_radius=0)
        world = backproject_depth(img, K, view)
        assert np.allclose(world[0], [0, 0, 0], atol=1e-9)


class TestIntrinsicsAndPgm:
    def test_bad_intrinsics(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=-1, fy=1, cx=0, cy=0, width=8, height=8)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=1, fy=1, cx=20, cy=0, width=8, height=8)

    def test_depth_validation(self):
        with pytest.raises(ValueError):
            DepthImage(np.array([[-1.0]]))
        with pytest.raises(ValueError):
            DepthImage(np.array([[np.inf]]))

    def test_pgm_roundtrip(self, tmp_path):
        img = render_depth([[0, 0, 0.5], [0.1, 0.05, 0.8]], K, splat_radius=1)
        path = tmp_path / "d.pgm"
        save_pgm(img, path)
        back = load_pgm(path)
        assert back.depth.shape == img.depth.shape
        # millimeter quantization
        assert np.abs(back.depth - img.depth).max() <= 0.0005 + 1e-9
        with open(path, "rb") as fh:
            assert fh.read(2) == b"P5"

    def test_pgm_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(ParseError):
            load_pgm(path)
