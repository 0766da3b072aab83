import numpy as np
import pytest
from dataclasses import replace

from touchpose.config import Config, EnvConfig, WorkspaceConfig
from touchpose.env import (
    StepOutcome,
    TactileEnv,
    TerminationReason,
    Workspace,
    contact_query,
)
from touchpose.errors import ContractViolation, InitializationError
from touchpose.hand import ActionId, HandState, build_hand, initial_hand_state
from touchpose.config import HandConfig
from touchpose.geometry import RigidTransform
from touchpose.mesh import MeshProximity, TriMesh
from touchpose.objects import get_object


def slab(z_top=0.0, half=1.0):
    v = np.array(
        [
            [-half, -half, z_top - 0.02], [half, -half, z_top - 0.02],
            [half, half, z_top - 0.02], [-half, half, z_top - 0.02],
            [-half, -half, z_top], [half, -half, z_top],
            [half, half, z_top], [-half, half, z_top],
        ]
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7],
            [0, 1, 5], [0, 5, 4], [2, 3, 7], [2, 7, 6],
            [1, 2, 6], [1, 6, 5], [3, 0, 4], [3, 4, 7],
        ]
    )
    return TriMesh(v, f)


class TestWorkspace:
    def test_box_contains(self):
        ws = Workspace.box(0.1, 0.1, -0.1, 0.1)
        assert ws.contains([0, 0, 0])
        assert not ws.contains([0.11, 0, 0])
        assert not ws.contains([0.1, 0, 0])  # on the boundary counts as out

    def test_heights_signs(self):
        ws = Workspace.box(0.1, 0.1, -0.2, 0.05)
        h = ws.heights([0.05, 0, 0])
        assert h.min() == pytest.approx(0.05)


class TestContactQuery:
    def test_no_patch_near_is_empty(self):
        model = build_hand(HandConfig())
        prox = MeshProximity(slab(z_top=0.0))
        st = initial_hand_state([0, 0, -0.5])
        assert contact_query(model, st, prox) == []

    def test_plane_contact_normal_oracle(self):
        # wrist flipped pi about x so the palm faces a slab below; at this
        # height exactly the palmar (bottom) patches are in range
        model = build_hand(HandConfig())
        prox = MeshProximity(slab(z_top=0.0))
        from touchpose.geometry import rot_x

        wrist = RigidTransform(rot_x(np.pi), [0, 0.05, 0.014])
        st = model.bend_fingers_until_contact(HandState(wrist), prox)
        records = contact_query(model, st, prox)
        assert len(records) == 5
        for r in records:
            assert r.patch == 1  # bottom patch on every finger
            # recorded object normal points out of the slab (up), within 15 deg
            ang = np.degrees(np.arccos(np.clip(np.dot(r.normal, [0, 0, 1]), -1, 1)))
            assert ang < 15.0
            assert abs(r.point[2] - 0.0) < 1e-9  # point lies on the surface

    def test_two_patches_two_records(self):
        model = build_hand(HandConfig())
        prox = MeshProximity(slab(z_top=-0.06))
        st = model.bend_fingers_until_contact(initial_hand_state([0, 0, -0.10]), prox)
        records = contact_query(model, st, prox)
        assert len(records) >= 2
        keys = {(r.finger, r.patch) for r in records}
        assert len(keys) == len(records)


class TestReset:
    def test_sphere_reset_touches(self):
        env = TactileEnv(get_object("sphere"))
        obs = env.reset(seed=3)
        assert obs.touch.any()
        assert env.workspace.contains(obs.wrist.translation)
        assert len(obs.contacts) >= 1
        assert obs.t == 0
        # approach ray-march oracle: wrist advanced along +z from the start
        start_z = -Config().env.start_offset
        assert obs.wrist.translation[2] >= start_z
        assert np.allclose(obs.wrist.translation[:2], 0)

    def test_reset_determinism(self):
        a = TactileEnv(get_object("sphere")).reset(seed=11)
        b = TactileEnv(get_object("sphere")).reset(seed=11)
        assert np.array_equal(a.contacts.points, b.contacts.points)
        assert np.array_equal(a.joints, b.joints)
        assert np.array_equal(a.wrist.translation, b.wrist.translation)

    def test_unreachable_object_raises(self):
        # workspace too short for the approach to ever reach the object
        cfg = Config(env=EnvConfig(start_offset=0.14),
                     workspace=WorkspaceConfig(z_max=-0.12))
        env = TactileEnv(get_object("sphere"), cfg)
        with pytest.raises(InitializationError):
            env.reset(seed=0)


class TestStep:
    def test_boundary_termination(self):
        env = TactileEnv(get_object("sphere"))
        env.reset(seed=3)
        # march straight toward -y until the wall: expect Boundary
        outcome = None
        for _ in range(200):
            obs, outcome = env.step(ActionId.TRANS_Y_NEG)
            if outcome.terminated:
                break
        assert outcome.terminated
        # LostContact can fire first while leaving the object; force past it
        assert outcome.reason in (TerminationReason.BOUNDARY, TerminationReason.LOST_CONTACT)

    def test_boundary_exact(self):
        env = TactileEnv(get_object("sphere"))
        env.reset(seed=3)
        # drive along +z (stays in contact with the object ahead) until wall
        pos = env.wrist.translation
        steps_to_wall = int(np.floor((0.06 - pos[2]) / 0.005)) + 1
        outcome = None
        for i in range(steps_to_wall + 50):
            obs, outcome = env.step(ActionId.TRANS_Z_POS)
            if outcome.terminated:
                break
        assert outcome.reason is TerminationReason.BOUNDARY
        assert obs is None

    def test_orientation_termination(self):
        cfg = Config(workspace=WorkspaceConfig(max_tilt=0.35))
        env = TactileEnv(slab(z_top=-0.05, half=0.5), cfg)
        env.reset(seed=0)
        outcome = None
        for _ in range(10):
            _, outcome = env.step(ActionId.ROT_X_POS)
            if outcome.terminated:
                break
        assert outcome.reason is TerminationReason.BOUNDARY
        # 0.1 rad per step: the fourth step crosses 0.35
        assert env.t == 4

    def test_lost_contact_on_sixth_touchless_step(self):
        env = TactileEnv(get_object("sphere"))
        env.reset(seed=3)
        # move away laterally until touchless, then count the streak
        outcome = None
        touchless = 0
        for _ in range(400):
            _, outcome = env.step(ActionId.TRANS_X_POS)
            if outcome.new_contacts:
                touchless = 0
            else:
                touchless += 1
            if outcome.terminated:
                break
        assert outcome.reason is TerminationReason.LOST_CONTACT
        assert touchless == 6

    def test_horizon_termination(self):
        # large slab: +x/-x shuffle keeps touching forever
        env = TactileEnv(slab(z_top=-0.05, half=2.0))
        env.reset(seed=0)
        outcome = None
        k = 0
        while True:
            a = ActionId.TRANS_X_POS if k % 2 == 0 else ActionId.TRANS_X_NEG
            _, outcome = env.step(a)
            k += 1
            if outcome.terminated:
                break
        assert outcome.reason is TerminationReason.HORIZON
        assert env.t == 400

    def test_step_after_termination_raises(self):
        env = TactileEnv(get_object("sphere"))
        env.reset(seed=3)
        while True:
            _, outcome = env.step(ActionId.TRANS_X_POS)
            if outcome.terminated:
                break
        with pytest.raises(ContractViolation):
            env.step(ActionId.TRANS_X_POS)

    def test_contacts_grow_and_lie_on_surface(self):
        env = TactileEnv(get_object("cuboid"))
        env.reset(seed=5)
        prox = MeshProximity(env.world_mesh)
        rng = np.random.default_rng(0)
        prev = len(env.contacts())
        for _ in range(60):
            if env.terminated:
                break
            _, outcome = env.step(ActionId(int(rng.integers(0, 12))))
            now = len(env.contacts())
            assert now >= prev
            prev = now
        pts = env.contacts().points
        _, d, _ = prox.closest(pts)
        assert d.max() < 0.005

    def test_wrist_inside_at_every_nonterminal_step(self):
        env = TactileEnv(get_object("cuboid"))
        env.reset(seed=5)
        rng = np.random.default_rng(1)
        for _ in range(80):
            if env.terminated:
                break
            obs, outcome = env.step(ActionId(int(rng.integers(0, 12))))
            if not outcome.terminated:
                assert env.workspace.heights(obs.wrist.translation).min() >= 0

    def test_bitwise_determinism_full_episode(self):
        actions = [ActionId(int(a)) for a in np.random.default_rng(2).integers(0, 12, 50)]

        def run():
            env = TactileEnv(get_object("cylinder"))
            env.reset(seed=9)
            for a in actions:
                if env.terminated:
                    break
                env.step(a)
            return env.contacts()

        c1, c2 = run(), run()
        assert np.array_equal(c1.points, c2.points)
        assert np.array_equal(c1.normals, c2.normals)
        assert np.array_equal(c1.steps, c2.steps)

    def test_outcome_consistency_guard(self):
        with pytest.raises(ValueError):
            StepOutcome((), True, TerminationReason.NONE)
