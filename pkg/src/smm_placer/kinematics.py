"""Rigid transforms, serial revolute chains, forward kinematics and geometric Jacobians.

All angles are radians, all lengths meters. Rotations are stored as 3x3
orthonormal matrices; no quaternion representation is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .collision import Capsule

_ORTHO_TOL = 1e-9


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


def skew(v: np.ndarray) -> np.ndarray:
    """3x3 cross-product matrix of a 3-vector."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class Pose:
    """Rigid transform in SE(3): p_world = rotation @ p_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = _as_vec3(self.translation).copy()
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation matrix is not orthonormal")
        if np.linalg.det(R) < 0.0:
            raise ValueError("rotation matrix has negative determinant")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def compose(self, other: "Pose") -> "Pose":
        """Return self ∘ other (apply other first, then self)."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -(self.rotation.T @ self.translation))

    def transform_point(self, p) -> np.ndarray:
        return self.rotation @ _as_vec3(p) + self.translation

    def almost_equal(self, other: "Pose", tol: float = 1e-12) -> bool:
        return (np.max(np.abs(self.rotation - other.rotation)) <= tol
                and np.max(np.abs(self.translation - other.translation)) <= tol)


def identity() -> Pose:
    return Pose(np.eye(3), np.zeros(3))


def translation(x: float, y: float, z: float) -> Pose:
    return Pose(np.eye(3), np.array([x, y, z], dtype=float))


def rot_axis(axis, angle: float) -> Pose:
    """Rotation about an arbitrary unit axis (Rodrigues)."""
    a = _as_vec3(axis)
    n = np.linalg.norm(a)
    if abs(n - 1.0) > _ORTHO_TOL:
        raise ValueError("rotation axis must be unit length")
    K = skew(a)
    R = np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
    return Pose(R, np.zeros(3))


def rot_x(angle: float) -> Pose:
    return rot_axis((1.0, 0.0, 0.0), angle)


def rot_y(angle: float) -> Pose:
    return rot_axis((0.0, 1.0, 0.0), angle)


def rot_z(angle: float) -> Pose:
    return rot_axis((0.0, 0.0, 1.0), angle)


def rpy(roll: float, pitch: float, yaw: float) -> Pose:
    """Fixed-axis roll-pitch-yaw rotation, Rz(yaw)·Ry(pitch)·Rx(roll)."""
    return rot_z(yaw).compose(rot_y(pitch)).compose(rot_x(roll))


def rotation_angle(R: np.ndarray) -> float:
    """Angle of a rotation matrix in [0, pi], stable near zero."""
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def rotation_vector(R: np.ndarray) -> np.ndarray:
    """Log map of a rotation matrix: angle * unit axis."""
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(w)
    c = 0.5 * (np.trace(R) - 1.0)
    angle = np.arctan2(s, c)
    if s > 1e-9:
        return w * (angle / s)
    if c > 0.0:
        return w  # first-order accurate near identity
    # Near pi the skew part vanishes; recover the axis from R = 2aa^T - I.
    d = np.clip((np.diag(R) + 1.0) / 2.0, 0.0, None)
    i = int(np.argmax(d))
    axis = np.empty(3)
    axis[i] = np.sqrt(d[i])
    for j in range(3):
        if j != i:
            axis[j] = (R[i, j] + R[j, i]) / (4.0 * axis[i])
    axis /= np.linalg.norm(axis)
    return axis * angle


def pose_error(a: Pose, b: Pose) -> tuple[float, float]:
    """(Euclidean position error, angle of the relative rotation)."""
    pos = float(np.linalg.norm(a.translation - b.translation))
    ori = rotation_angle(a.rotation.T @ b.rotation)
    return pos, ori


@dataclass(frozen=True)
class LinkCapsule:
    """A collision capsule rigidly attached to a link frame.

    link 0 is the chain base frame (immobile); link i >= 1 is the frame
    after joint i.
    """

    link: int
    capsule: "Capsule"


@dataclass(frozen=True)
class RevoluteJoint:
    origin: Pose          # fixed transform from the previous frame
    axis: np.ndarray      # unit rotation axis in the joint frame
    lower: float
    upper: float

    def __post_init__(self):
        a = _as_vec3(self.axis).copy()
        if abs(np.linalg.norm(a) - 1.0) > _ORTHO_TOL:
            raise ValueError("joint axis must be unit length")
        if not self.lower < self.upper:
            raise ValueError(f"joint limits must satisfy lower < upper, got [{self.lower}, {self.upper}]")
        a.flags.writeable = False
        object.__setattr__(self, "axis", a)


@dataclass(frozen=True)
class KinematicChain:
    """Serial chain of revolute joints with an optional rigid tool transform."""

    joints: tuple[RevoluteJoint, ...]
    tool: Pose = field(default_factory=identity)
    base: Pose = field(default_factory=identity)
    capsules: tuple[LinkCapsule, ...] = ()
    collision_exempt: frozenset[tuple[int, int]] = frozenset()
    name: str = "chain"

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "capsules", tuple(self.capsules))
        exempt = frozenset(tuple(sorted(p)) for p in self.collision_exempt)
        object.__setattr__(self, "collision_exempt", exempt)
        n = len(joints)
        origin_R = np.empty((n, 3, 3))
        origin_t = np.empty((n, 3))
        K = np.empty((n, 3, 3))
        K2 = np.empty((n, 3, 3))
        axes = np.empty((n, 3))
        lower = np.empty(n)
        upper = np.empty(n)
        for i, j in enumerate(joints):
            origin_R[i] = j.origin.rotation
            origin_t[i] = j.origin.translation
            K[i] = skew(j.axis)
            K2[i] = K[i] @ K[i]
            axes[i] = j.axis
            lower[i] = j.lower
            upper[i] = j.upper
        for arr in (origin_R, origin_t, K, K2, axes, lower, upper):
            arr.flags.writeable = False
        object.__setattr__(self, "_origin_R", origin_R)
        object.__setattr__(self, "_origin_t", origin_t)
        object.__setattr__(self, "_K", K)
        object.__setattr__(self, "_K2", K2)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        reach = float(np.sum(np.linalg.norm(origin_t, axis=1))
                      + np.linalg.norm(self.tool.translation))
        object.__setattr__(self, "max_reach", reach)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def check_config(self, q) -> np.ndarray:
        a = np.asarray(q, dtype=float).reshape(-1)
        if a.shape != (self.n_joints,):
            raise ValueError(f"config has {a.shape[0]} angles, chain has {self.n_joints} joints")
        if not np.all(np.isfinite(a)):
            raise ValueError("config contains non-finite angles")
        return a

    def within_limits(self, q, tol: float = 1e-9) -> bool:
        a = np.asarray(q, dtype=float)
        return bool(np.all(a >= self.lower - tol) and np.all(a <= self.upper + tol))

    def clamp(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lower, self.upper)

    def sample_config(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


def with_base(chain: KinematicChain, base: Pose) -> KinematicChain:
    """Chain premultiplied by a rigid base transform."""
    return replace(chain, base=base.compose(chain.base))


def _frames_raw(chain: KinematicChain, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World rotations/origins of frames 0..n (0 = base, i = after joint i)."""
    n = chain.n_joints
    Rs = np.empty((n + 1, 3, 3))
    ts = np.empty((n + 1, 3))
    R = chain.base.rotation
    t = chain.base.translation
    Rs[0] = R
    ts[0] = t
    oR, ot, K, K2 = chain._origin_R, chain._origin_t, chain._K, chain._K2
    s = np.sin(q)
    c = np.cos(q)
    eye = np.eye(3)
    for i in range(n):
        t = R @ ot[i] + t
        R = R @ oR[i]
        R = R @ (eye + s[i] * K[i] + (1.0 - c[i]) * K2[i])
        Rs[i + 1] = R
        ts[i + 1] = t
    return Rs, ts


def _ee_raw(chain: KinematicChain, Rs: np.ndarray, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R = Rs[-1] @ chain.tool.rotation
    t = Rs[-1] @ chain.tool.translation + ts[-1]
    return R, t


def link_frames(chain: KinematicChain, q) -> list[Pose]:
    """World pose of every link frame, base first."""
    qa = chain.check_config(q)
    Rs, ts = _frames_raw(chain, qa)
    return [Pose(Rs[i], ts[i]) for i in range(chain.n_joints + 1)]


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """End-effector pose: base ∘ (joint transforms in order) ∘ tool."""
    qa = chain.check_config(q)
    Rs, ts = _frames_raw(chain, qa)
    R, t = _ee_raw(chain, Rs, ts)
    return Pose(R, t)


def _pose_jac_raw(chain: KinematicChain, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(R_ee, t_ee, 6xn Jacobian) in one frame sweep; q must be validated."""
    Rs, ts = _frames_raw(chain, q)
    R_ee, p_ee = _ee_raw(chain, Rs, ts)
    n = chain.n_joints
    J = np.empty((6, n))
    # z_i = Rs[i+1] @ axis_i: the joint's own rotation fixes its axis.
    z = np.einsum("ijk,ik->ij", Rs[1:], chain.axes)
    arm = p_ee[None, :] - ts[1:]
    J[:3] = np.cross(z, arm).T
    J[3:] = z.T
    return R_ee, p_ee, J


def geometric_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """6xn world-frame Jacobian at the end-effector point.

    Column i is (z_i x (p_ee - p_i); z_i) for the world-frame axis z_i and
    origin p_i of revolute joint i.
    """
    qa = chain.check_config(q)
    return _pose_jac_raw(chain, qa)[2]
