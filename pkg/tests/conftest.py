"""Shared chain builders and independent numerical oracles for the tests."""

import math

import numpy as np
import pytest

from smm_placer.kinematics import (
    KinematicChain,
    Pose,
    RevoluteJoint,
    forward_kinematics,
    translation,
)
from smm_placer.robot_config import load_builtin_robot


def planar_chain(*lengths, limits=(-math.pi, math.pi), name="planar"):
    """Z-axis revolute joints with links along +x; tool y/z stay zero."""
    joints = []
    prev = 0.0
    for length in lengths:
        joints.append(RevoluteJoint(origin=translation(prev, 0.0, 0.0),
                                    axis=(0.0, 0.0, 1.0),
                                    lower=limits[0], upper=limits[1]))
        prev = length
    return KinematicChain(joints=tuple(joints), tool=translation(prev, 0.0, 0.0),
                          name=name)


def random_chain(rng, n_joints=None):
    """Random serial chain with unit-normalized axes and modest offsets."""
    n = int(n_joints if n_joints is not None else rng.integers(2, 8))
    joints = []
    for _ in range(n):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-math.pi, math.pi)
        rot_axis_v = rng.normal(size=3)
        rot_axis_v /= np.linalg.norm(rot_axis_v)
        K = np.array([[0, -rot_axis_v[2], rot_axis_v[1]],
                      [rot_axis_v[2], 0, -rot_axis_v[0]],
                      [-rot_axis_v[1], rot_axis_v[0], 0]])
        R = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
        origin = Pose(R, rng.uniform(-0.3, 0.3, size=3))
        joints.append(RevoluteJoint(origin=origin, axis=axis, lower=-2.5, upper=2.5))
    return KinematicChain(joints=tuple(joints), tool=translation(0.05, 0.0, 0.1),
                          name="random")


def fd_jacobian(chain, q, h=1e-6):
    """Central finite differences of forward kinematics (independent oracle)."""
    q = np.asarray(q, dtype=float)
    J = np.zeros((6, chain.n_joints))
    for i in range(chain.n_joints):
        e = np.zeros(chain.n_joints)
        e[i] = h
        pa = forward_kinematics(chain, q + e)
        pb = forward_kinematics(chain, q - e)
        J[:3, i] = (pa.translation - pb.translation) / (2 * h)
        dR = pa.rotation @ pb.rotation.T
        w = 0.5 * np.array([dR[2, 1] - dR[1, 2], dR[0, 2] - dR[2, 0], dR[1, 0] - dR[0, 1]])
        J[3:, i] = w / (2 * h)
    return J


def random_pose(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-math.pi, math.pi)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
    return Pose(R, rng.uniform(-1.0, 1.0, size=3))


@pytest.fixture(scope="session")
def xarm_chain():
    return load_builtin_robot()


# --- planar 3R oracle shared by the smm tests and the acceptance suite ---

PLANAR_LENGTHS = (0.4, 0.5, 0.5)
PLANAR_LIMITS = ((-2.5, 2.5), (-2.8, 2.8), (-2.8, 2.8))


def wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def two_link_ik(la, lb, wx, wy):
    """Closed-form 2R position IK: [(absolute first-segment angle, elbow angle)]."""
    d2 = wx * wx + wy * wy
    c = (d2 - la * la - lb * lb) / (2 * la * lb)
    if abs(c) > 1.0:
        return []
    out = []
    for sign in (1.0, -1.0):
        beta = sign * math.acos(max(-1.0, min(1.0, c)))
        alpha = math.atan2(wy, wx) - math.atan2(lb * math.sin(beta), la + lb * math.cos(beta))
        out.append((wrap_angle(alpha), beta))
    return out


def three_link_chain():
    l1, l2, l3 = PLANAR_LENGTHS
    joints = tuple(
        RevoluteJoint(origin=translation(prev, 0, 0), axis=(0, 0, 1), lower=lo, upper=hi)
        for prev, (lo, hi) in zip((0.0, l1, l2), PLANAR_LIMITS)
    )
    return KinematicChain(joints=joints, tool=translation(l3, 0, 0), name="planar3")


def three_link_manifold_sweep(target_xy, resolution=0.01):
    """Exhaustive manifold point set: sweep q1 at fixed resolution, solve the
    remaining 2R subchain in closed form, keep in-limit solutions."""
    l1, l2, l3 = PLANAR_LENGTHS
    (lo1, hi1), (lo2, hi2), (lo3, hi3) = PLANAR_LIMITS
    tx, ty = target_xy
    pts = []
    for q1 in np.arange(lo1, hi1 + resolution / 2, resolution):
        wx = tx - l1 * math.cos(q1)
        wy = ty - l1 * math.sin(q1)
        for alpha, beta in two_link_ik(l2, l3, wx, wy):
            q2 = wrap_angle(alpha - q1)
            q3 = beta
            if lo2 <= q2 <= hi2 and lo3 <= q3 <= hi3:
                pts.append((q1, q2, q3))
    return np.array(pts) if pts else np.empty((0, 3))


def cluster_count(points, radius=0.25):
    """Single-linkage clusters; the sweep resolution bounds within-branch gaps."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        d = np.linalg.norm(points[i + 1:] - points[i], axis=1)
        for j in np.flatnonzero(d < radius):
            a, b = find(i), find(int(i + 1 + j))
            if a != b:
                parent[a] = b
    return len({find(i) for i in range(n)})


def planar_target(x, y):
    return Pose(np.eye(3), np.array([x, y, 0.0]))
