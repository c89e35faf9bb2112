"""Collision primitives and the per-configuration feasibility filter.

Obstacles are a ground half-space plus a semi-elliptic canopy ridge; robot
links carry capsules. The ridge constrains only the capsule set named by
``ridge_scope`` (the immobile shoulder geometry), the ground constrains
everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import KinematicChain, Pose, _as_vec3, _frames_raw

RIDGE_SAMPLE_STEP = 0.01  # m, capsule-axis sampling for the ridge test


@dataclass(frozen=True)
class Capsule:
    """Segment from a to b, inflated by radius."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        a = _as_vec3(self.a).copy()
        b = _as_vec3(self.b).copy()
        if not self.radius > 0.0:
            raise ValueError("capsule radius must be positive")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def transformed(self, pose: Pose) -> "Capsule":
        return Capsule(pose.transform_point(self.a), pose.transform_point(self.b), self.radius)


@dataclass(frozen=True)
class HalfSpace:
    """Plane normal·p = offset; the forbidden side is normal·p < offset."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = _as_vec3(self.normal).copy()
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("half-space normal must be unit length")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True)
class SemiEllipticCylinder:
    """Canopy ridge: upper half-ellipse cross-section extruded along y.

    center is the base-center point on the ground, height the vertical
    semi-axis, width the full horizontal extent and length the extrusion
    along y.
    """

    center: np.ndarray
    height: float
    width: float
    length: float

    def __post_init__(self):
        c = _as_vec3(self.center).copy()
        if not (self.height > 0.0 and self.width > 0.0 and self.length > 0.0):
            raise ValueError("ridge dimensions must be positive")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class ObstacleSet:
    ground: HalfSpace | None = None
    ridge: SemiEllipticCylinder | None = None
    ridge_scope: frozenset[int] = field(default_factory=lambda: frozenset({0}))

    def __post_init__(self):
        object.__setattr__(self, "ridge_scope", frozenset(self.ridge_scope))


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Minimum distance between segments [p1,q1] and [p2,q2] (Ericson)."""
    p1 = np.asarray(p1, float)
    q1 = np.asarray(q1, float)
    p2 = np.asarray(p2, float)
    q2 = np.asarray(q2, float)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    eps = 1e-14
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e <= eps:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    closest1 = p1 + s * d1
    closest2 = p2 + t * d2
    return float(np.linalg.norm(closest1 - closest2))


def capsule_pair_distance(a: Capsule, b: Capsule) -> float:
    """Signed clearance between two capsules; negative means penetration."""
    return segment_segment_distance(a.a, a.b, b.a, b.b) - a.radius - b.radius


def capsule_halfspace_clearance(c: Capsule, h: HalfSpace) -> float:
    """Signed clearance of a capsule above the forbidden side of a plane."""
    return float(min(h.normal @ c.a, h.normal @ c.b) - h.offset - c.radius)


def ridge_contains(ridge: SemiEllipticCylinder, p) -> bool:
    """True iff p lies inside the semi-elliptic cylinder (boundary included)."""
    v = _as_vec3(p) - ridge.center
    if abs(v[1]) > ridge.length / 2.0:
        return False
    if v[2] < 0.0:
        return False
    return (v[0] / (ridge.width / 2.0)) ** 2 + (v[2] / ridge.height) ** 2 <= 1.0


def capsule_intersects_ridge(ridge: SemiEllipticCylinder, c: Capsule) -> bool:
    """Conservative capsule/ridge test.

    Samples the capsule axis and tests each point against the ridge with
    semi-axes and length inflated by the radius; an exact capsule/ellipse
    distance has no closed form, so this over-approximates (never falsely
    accepts a colliding capsule).
    """
    length = float(np.linalg.norm(c.b - c.a))
    n = max(2, int(np.ceil(length / RIDGE_SAMPLE_STEP)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = c.a[None, :] + ts[:, None] * (c.b - c.a)[None, :]
    v = pts - ridge.center
    r = c.radius
    in_y = np.abs(v[:, 1]) <= ridge.length / 2.0 + r
    above = v[:, 2] >= -r
    z = np.maximum(v[:, 2], 0.0)
    in_ellipse = (v[:, 0] / (ridge.width / 2.0 + r)) ** 2 + (z / (ridge.height + r)) ** 2 <= 1.0
    return bool(np.any(in_y & above & in_ellipse))


def world_capsules(chain: KinematicChain, Rs: np.ndarray, ts: np.ndarray) -> list[Capsule]:
    out = []
    for lc in chain.capsules:
        R = Rs[lc.link]
        t = ts[lc.link]
        out.append(Capsule(R @ lc.capsule.a + t, R @ lc.capsule.b + t, lc.capsule.radius))
    return out


def config_in_collision(chain: KinematicChain, q, obstacles: ObstacleSet) -> str | None:
    """First violated constraint category for a configuration, or None if free.

    Categories, in check order: "joint-limit", "self-collision", "ground",
    "ridge". Capsule pairs on the same link or listed in the chain's
    exemption set are skipped.
    """
    qa = chain.check_config(q)
    if not chain.within_limits(qa):
        return "joint-limit"
    if not chain.capsules:
        return None
    Rs, ts = _frames_raw(chain, qa)
    caps = world_capsules(chain, Rs, ts)
    links = [lc.link for lc in chain.capsules]
    for i in range(len(caps)):
        for j in range(i + 1, len(caps)):
            if links[i] == links[j] or (i, j) in chain.collision_exempt:
                continue
            if capsule_pair_distance(caps[i], caps[j]) < 0.0:
                return "self-collision"
    if obstacles.ground is not None:
        for c in caps:
            if capsule_halfspace_clearance(c, obstacles.ground) < 0.0:
                return "ground"
    if obstacles.ridge is not None:
        for lc, c in zip(chain.capsules, caps):
            if lc.link in obstacles.ridge_scope and capsule_intersects_ridge(obstacles.ridge, c):
                return "ridge"
    return None
