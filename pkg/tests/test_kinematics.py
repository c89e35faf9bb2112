import math

import numpy as np
import pytest
import yaml

from smm_placer.kinematics import (
    Pose,
    forward_kinematics,
    geometric_jacobian,
    identity,
    link_frames,
    pose_error,
    rot_x,
    rot_y,
    rotation_vector,
    rpy,
    translation,
    with_base,
)
from smm_placer.robot_config import builtin_robot_path

from conftest import fd_jacobian, planar_chain, random_chain, random_pose


class TestPose:
    def test_compose_identity(self):
        rng = np.random.default_rng(3)
        p = random_pose(rng)
        assert identity().compose(p).almost_equal(p)
        assert p.compose(identity()).almost_equal(p)

    def test_pure_translations_add(self):
        c = translation(1, 0, 0).compose(translation(0, 2, 0))
        np.testing.assert_allclose(c.translation, [1, 2, 0])
        np.testing.assert_allclose(c.rotation, np.eye(3))

    def test_rx_ry_product_columns(self):
        # Rx(pi/2) @ Ry(pi/2) maps (e_x, e_y, e_z) -> (e_y, e_z, e_x)
        c = rot_x(math.pi / 2).compose(rot_y(math.pi / 2))
        expected = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(c.rotation, expected, atol=1e-15)
        np.testing.assert_allclose(c.translation, np.zeros(3), atol=1e-15)

    def test_compose_associative(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = a.compose(b).compose(c)
            right = a.compose(b.compose(c))
            assert left.almost_equal(right, tol=1e-12)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.01, np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_inverse(self):
        rng = np.random.default_rng(5)
        p = random_pose(rng)
        assert p.compose(p.inverse()).almost_equal(identity(), tol=1e-12)

    def test_rotation_vector_roundtrip(self):
        rng = np.random.default_rng(6)
        for angle in (1e-9, 0.3, 2.0, math.pi - 1e-7, math.pi):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            from smm_placer.kinematics import rot_axis
            R = rot_axis(axis, angle).rotation
            v = rotation_vector(R)
            assert abs(np.linalg.norm(v) - angle) < 1e-6


class TestForwardKinematics:
    def test_two_link_straight(self):
        chain = planar_chain(1.0, 1.0)
        p = forward_kinematics(chain, (0.0, 0.0))
        np.testing.assert_allclose(p.translation, [2, 0, 0], atol=1e-15)
        np.testing.assert_allclose(p.rotation, np.eye(3), atol=1e-15)

    def test_two_link_rotated(self):
        chain = planar_chain(1.0, 1.0)
        p = forward_kinematics(chain, (math.pi / 2, 0.0))
        np.testing.assert_allclose(p.translation, [0, 2, 0], atol=1e-12)

    def test_shipped_config_zero_pose_matches_matrix_product(self, xarm_chain):
        # independent oracle: 4x4 homogeneous products straight from the YAML
        doc = yaml.safe_load(builtin_robot_path().read_text())

        def hom(xyz, rpy_angles):
            r, p, y = rpy_angles
            T = np.eye(4)
            T[:3, :3] = rpy(r, p, y).rotation
            T[:3, 3] = xyz
            return T

        M = np.eye(4)
        for j in doc["joints"]:
            M = M @ hom(j["xyz"], j["rpy"])  # zero config: joint rotations are identity
        M = M @ hom(doc["tool"]["xyz"], doc["tool"]["rpy"])
        pose = forward_kinematics(xarm_chain, np.zeros(7))
        np.testing.assert_allclose(pose.rotation, M[:3, :3], atol=1e-12)
        np.testing.assert_allclose(pose.translation, M[:3, 3], atol=1e-12)

    def test_dimension_error(self, xarm_chain):
        with pytest.raises(ValueError):
            forward_kinematics(xarm_chain, np.zeros(6))

    def test_base_premultiplication(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            chain = random_chain(rng)
            B = random_pose(rng)
            q = chain.sample_config(rng)
            direct = forward_kinematics(with_base(chain, B), q)
            composed = B.compose(forward_kinematics(chain, q))
            assert direct.almost_equal(composed, tol=1e-12)


class TestJacobian:
    def test_planar_elbow_determinant(self):
        # |det| of the x-y linear block equals L1*L2*|sin q2| = 1 at q2 = pi/2
        chain = planar_chain(1.0, 1.0)
        J = geometric_jacobian(chain, (0.0, math.pi / 2))
        det = np.linalg.det(J[:2, :])
        assert abs(abs(det) - 1.0) < 1e-12

    def test_straight_arm_singularity(self):
        chain = planar_chain(1.0, 1.0)
        J = geometric_jacobian(chain, (0.0, 0.0))
        s = np.linalg.svd(J[:2, :], compute_uv=False)
        assert s[-1] < 1e-12

    def test_matches_finite_differences(self, xarm_chain):
        rng = np.random.default_rng(21)
        for _ in range(25):
            q = xarm_chain.sample_config(rng)
            err = np.abs(geometric_jacobian(xarm_chain, q) - fd_jacobian(xarm_chain, q)).max()
            assert err < 1e-5
        for _ in range(25):
            chain = random_chain(rng)
            q = chain.sample_config(rng)
            err = np.abs(geometric_jacobian(chain, q) - fd_jacobian(chain, q)).max()
            assert err < 1e-5

    def test_base_premultiply_rotates_blocks(self):
        # the base translation cancels in z_i x (p_ee - p_i), so a full rigid
        # B rotates both 3-row blocks by its rotation
        rng = np.random.default_rng(33)
        for _ in range(10):
            chain = random_chain(rng)
            B = random_pose(rng)
            q = chain.sample_config(rng)
            J = geometric_jacobian(chain, q)
            JB = geometric_jacobian(with_base(chain, B), q)
            np.testing.assert_allclose(JB[:3], B.rotation @ J[:3], atol=1e-12)
            np.testing.assert_allclose(JB[3:], B.rotation @ J[3:], atol=1e-12)


class TestPoseError:
    def test_identity_case(self):
        p = random_pose(np.random.default_rng(2))
        assert pose_error(p, p) == (0.0, 0.0)

    def test_345_triangle(self):
        pos, ori = pose_error(identity(), translation(0.3, 0.4, 0.0))
        assert abs(pos - 0.5) < 1e-15
        assert ori == 0.0

    def test_single_axis_rotation(self):
        pos, ori = pose_error(identity(), rot_x(math.pi / 2))
        assert pos == 0.0
        assert abs(ori - math.pi / 2) < 1e-12


def test_link_frames_base_first(xarm_chain):
    frames = link_frames(xarm_chain, np.zeros(7))
    assert len(frames) == 8
    assert frames[0].almost_equal(identity())
