import numpy as np
import pytest

from comanip.geometry import (
    Configuration,
    GraspPose,
    Pose,
    RobotModel,
    compose,
    fk_matrix,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    pose_from_tva,
    pose_loss,
    rotation_angle,
    tva_from_pose,
)
from comanip.errors import UnreachableError

from conftest import random_rotation
from oracles import chain_fk, homogeneous


def random_pose(rng):
    return Pose(random_rotation(rng), rng.normal(scale=2.0, size=3))


class TestCompose:
    def test_identity(self):
        rng = np.random.default_rng(1)
        p = random_pose(rng)
        q = compose(Pose.identity(), p)
        assert np.allclose(q.rotation, p.rotation)
        assert np.allclose(q.translation, p.translation)

    def test_inverse(self):
        rng = np.random.default_rng(2)
        p = random_pose(rng)
        eye = compose(p, p.inverse())
        assert np.abs(eye.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(eye.translation).max() < 1e-9

    def test_matches_homogeneous_product(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = random_pose(rng), random_pose(rng)
            want = homogeneous(a.rotation, a.translation) @ homogeneous(b.rotation, b.translation)
            got = compose(a, b).to_matrix()
            assert np.abs(got - want).max() < 1e-12

    def test_long_chains_stay_orthonormal(self):
        rng = np.random.default_rng(4)
        p = Pose.identity()
        for _ in range(1000):
            p = compose(p, random_pose(rng))
        err = np.abs(p.rotation.T @ p.rotation - np.eye(3)).max()
        assert err < 1e-8

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.1, np.zeros(3))


class TestGraspPoseParam:
    def test_canonical_frame(self):
        g = GraspPose([0, 0, 0], [0, 0, 1], 0.0)
        p = pose_from_tva(g)
        assert np.allclose(p.rotation[:, 2], [0, 0, 1])
        assert np.allclose(p.translation, 0)

    def test_round_trip_1000(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            g = GraspPose(rng.normal(size=3), v, rng.uniform(0, np.pi))
            g2 = tva_from_pose(pose_from_tva(g))
            assert np.linalg.norm(g2.translation - g.translation) < 1e-6
            assert np.linalg.norm(g2.approach - g.approach) < 1e-6
            da = abs(g2.inplane - g.inplane) % np.pi
            assert min(da, np.pi - da) < 1e-6

    def test_alpha_pi_symmetry_same_closing_line(self):
        g1 = GraspPose([0.1, 0.2, 0.3], [0, 0, 1], 0.4)
        g2 = GraspPose([0.1, 0.2, 0.3], [0, 0, 1], 0.4 + np.pi)
        # alpha is normalized mod pi, so the closing axes coincide exactly
        assert np.allclose(g1.closing_axis(), g2.closing_axis())
        assert g1.inplane == pytest.approx(g2.inplane)

    def test_degenerate_rotation_rejected(self):
        # a non-orthonormal rotation cannot even build a Pose
        with pytest.raises(ValueError):
            Pose(np.zeros((3, 3)), np.zeros(3))


class TestPoseLoss:
    def test_identical_zero(self):
        g = GraspPose([1, 2, 3], [1, 0, 0], 0.7)
        assert pose_loss(g, g) == 0.0

    def test_alpha_shift_pi_zero(self):
        a = GraspPose([0, 0, 0], [0, 1, 0], 0.25)
        b = GraspPose([0, 0, 0], [0, 1, 0], 0.25 + np.pi)
        assert pose_loss(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_antipodal_approach_is_two(self):
        a = GraspPose([0.3, -0.1, 0.5], [0, 0, 1], 0.9)
        b = GraspPose([0.3, -0.1, 0.5], [0, 0, -1], 0.9)
        # ||v - (-v)||_2 = 2 for unit v, other terms vanish
        assert pose_loss(a, b) == pytest.approx(2.0, abs=1e-12)

    def test_symmetric_under_joint_alpha_shift(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            a1, a2 = rng.uniform(0, np.pi, size=2)
            ga = GraspPose(rng.normal(size=3), v, a1)
            gb = GraspPose(rng.normal(size=3), v, a2)
            base = pose_loss(ga, gb)
            shifted = pose_loss(
                GraspPose(ga.translation, v, a1 + np.pi),
                GraspPose(gb.translation, v, a2 + np.pi))
            swapped = pose_loss(gb, ga)
            assert shifted == pytest.approx(base, abs=1e-9)
            # the sin^2 term is symmetric in its arguments
            assert np.sin(a1 - a2) ** 2 == pytest.approx(np.sin(a2 - a1) ** 2)
            assert swapped == pytest.approx(base, abs=1e-9)

    def test_negative_weights_rejected(self):
        g = GraspPose([0, 0, 0], [0, 0, 1], 0.0)
        with pytest.raises(ValueError):
            pose_loss(g, g, weights=(-1, 1, 1))


class TestForwardKinematics:
    def test_home_pose(self, robot):
        # documented home: shoulder column 0.40 + 0.12, links 0.35 + 0.30 +
        # 0.12 + 0.08 + tool 0.10 forward, gripper approach along world +x
        p = forward_kinematics(robot, np.zeros(robot.dof))
        assert np.allclose(p.translation, [0.95, 0.0, 0.52], atol=1e-12)
        assert np.allclose(p.rotation[:, 2], [1.0, 0.0, 0.0], atol=1e-12)

    def test_base_translation_equivariance(self, robot):
        q0 = np.zeros(robot.dof)
        q1 = q0.copy()
        q1[0] = 1.0
        p0 = forward_kinematics(robot, q0)
        p1 = forward_kinematics(robot, q1)
        assert np.allclose(p1.translation - p0.translation, [1, 0, 0])
        assert np.allclose(p1.rotation, p0.rotation)

    def test_matches_chain_product_oracle(self, robot):
        rng = np.random.default_rng(7)
        lims = robot.joint_limits()
        for _ in range(100):
            q = rng.uniform(lims[:, 0], lims[:, 1])
            q[:2] = rng.uniform(-2, 2, size=2)
            want = chain_fk(robot, q)
            got = fk_matrix(robot, q)
            assert np.abs(got - want).max() < 1e-9

    def test_rigid_base_transform_equivariance(self, robot):
        rng = np.random.default_rng(8)
        for _ in range(20):
            q = rng.uniform(-1, 1, size=robot.dof)
            dyaw = rng.uniform(-np.pi, np.pi)
            shift = rng.uniform(-1, 1, size=2)
            c, s = np.cos(dyaw), np.sin(dyaw)
            q2 = q.copy()
            q2[0] = c * q[0] - s * q[1] + shift[0]
            q2[1] = s * q[0] + c * q[1] + shift[1]
            q2[2] = q[2] + dyaw
            W = Pose.from_xyzrpy(shift[0], shift[1], 0, yaw=dyaw)
            want = compose(W, forward_kinematics(robot, q))
            got = forward_kinematics(robot, q2)
            assert np.linalg.norm(got.translation - want.translation) < 1e-9
            assert np.abs(got.rotation - want.rotation).max() < 1e-9

    def test_dimension_mismatch(self, robot):
        with pytest.raises(ValueError):
            forward_kinematics(robot, np.zeros(robot.dof - 1))


class TestJacobian:
    def test_matches_finite_differences(self, robot):
        rng = np.random.default_rng(9)
        q = rng.uniform(-0.8, 0.8, size=robot.dof)
        J = jacobian(robot, q)
        eps = 1e-7
        for i in range(robot.dof):
            dq = np.zeros(robot.dof)
            dq[i] = eps
            Tp = fk_matrix(robot, q + dq)
            Tm = fk_matrix(robot, q - dq)
            dlin = (Tp[:3, 3] - Tm[:3, 3]) / (2 * eps)
            dR = (Tp[:3, :3] - Tm[:3, :3]) / (2 * eps) @ fk_matrix(robot, q)[:3, :3].T
            dang = np.array([dR[2, 1], dR[0, 2], dR[1, 0]])
            assert np.abs(J[:3, i] - dlin).max() < 1e-5
            assert np.abs(J[3:, i] - dang).max() < 1e-5


class TestInverseKinematics:
    def test_fixed_point(self, robot):
        q0 = Configuration(np.zeros(robot.dof))
        target = forward_kinematics(robot, q0)
        sol = inverse_kinematics(robot, target, q0)
        p = forward_kinematics(robot, sol)
        assert np.linalg.norm(p.translation - target.translation) < 1e-4
        assert rotation_angle(p.rotation.T @ target.rotation) < 1e-3

    def test_far_target_unreachable(self, robot):
        target = Pose(np.eye(3), [10_000.0, 0.0, 0.0])
        small = RobotModel(name="pinned", joints=robot.joints, gripper=robot.gripper,
                           tool=robot.tool, base_size=robot.base_size, base_xy_limits=1.0)
        with pytest.raises(UnreachableError) as e:
            inverse_kinematics(small, target, Configuration(np.zeros(small.dof)))
        assert e.value.best_position_error > 1.0

    def test_random_reachable_targets(self, robot):
        rng = np.random.default_rng(10)
        lims = robot.joint_limits()
        solved = 0
        for _ in range(100):
            q = rng.uniform(lims[:, 0] * 0.7, lims[:, 1] * 0.7)
            q[:2] = rng.uniform(-1.0, 1.0, size=2)
            target = forward_kinematics(robot, q)
            try:
                sol = inverse_kinematics(robot, target, Configuration(np.zeros(robot.dof)))
            except UnreachableError:
                continue
            p = forward_kinematics(robot, sol)
            if (np.linalg.norm(p.translation - target.translation) <= 1e-4
                    and rotation_angle(p.rotation.T @ target.rotation) <= 1e-3):
                solved += 1
        assert solved >= 95

    def test_solution_respects_limits(self, robot):
        rng = np.random.default_rng(11)
        q = rng.uniform(-0.5, 0.5, size=robot.dof)
        target = forward_kinematics(robot, q)
        sol = inverse_kinematics(robot, target, Configuration(np.zeros(robot.dof)))
        lims = robot.joint_limits()
        assert np.all(sol.values >= lims[:, 0] - 1e-12)
        assert np.all(sol.values <= lims[:, 1] + 1e-12)


class TestRobotModelConfig:
    def test_round_trip_via_file(self, robot, tmp_path):
        import json
        from comanip.geometry import _DEFAULT_ROBOT_CONFIG
        path = tmp_path / "robot.json"
        path.write_text(json.dumps(_DEFAULT_ROBOT_CONFIG))
        loaded = RobotModel.from_config(str(path))
        assert loaded.dof == robot.dof
        assert np.allclose(loaded.joint_limits(), robot.joint_limits())
        p1 = forward_kinematics(loaded, np.zeros(loaded.dof))
        p2 = forward_kinematics(robot, np.zeros(robot.dof))
        assert np.allclose(p1.to_matrix(), p2.to_matrix())

    def test_bad_limits_rejected(self):
        from comanip.geometry import RevoluteJoint
        with pytest.raises(ValueError):
            RevoluteJoint([0, 0, 1], [0, 0, 0], 1.0, -1.0)
