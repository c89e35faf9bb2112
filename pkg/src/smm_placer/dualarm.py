"""Mirrored dual-arm mount model: base transforms from the five design
parameters, combined forward kinematics, mount feasibility and the
min-combined two-arm task metric.

Arm 0 is mounted at +y and assigned to pepper (grasp) frames, arm 1 at -y
takes the peduncle (cut) frames.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .collision import (
    Capsule,
    ObstacleSet,
    capsule_intersects_ridge,
    capsule_halfspace_clearance,
    capsule_pair_distance,
)
from .kinematics import KinematicChain, Pose, forward_kinematics, rot_x, rot_y, translation
from .metrics import SmmParams, TargetEvaluation, evaluate_target
from .scenario import Task
from .seeding import derive_rng


@dataclass(frozen=True)
class DesignParams:
    """Mount placement (x, y, z, theta, xi): y is the half shoulder width,
    theta the shared pitch and xi the mirrored camber angle."""

    x: float
    y: float
    z: float
    theta: float
    xi: float

    def __post_init__(self):
        vals = (self.x, self.y, self.z, self.theta, self.xi)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("design parameters must be finite")
        if self.y < 0.0:
            raise ValueError("half shoulder width y must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.theta, self.xi])


def base_transforms(rho: DesignParams) -> tuple[Pose, Pose]:
    """World poses of the two mirrored arm mounts."""
    half_pi = math.pi / 2.0
    pitch_up = rot_y(rho.theta).compose(rot_x(half_pi))
    b0 = translation(rho.x, rho.y, rho.z).compose(pitch_up).compose(rot_y(half_pi - rho.xi))
    b1 = translation(rho.x, -rho.y, rho.z).compose(pitch_up).compose(rot_y(half_pi + rho.xi))
    return b0, b1


@dataclass(frozen=True)
class DualArmDesign:
    params: DesignParams
    base_0: Pose
    base_1: Pose
    shoulder_capsules: tuple[Capsule, ...]  # per arm, in that arm's base frame


def shoulder_capsules(chain: KinematicChain) -> tuple[Capsule, ...]:
    """The immobile mount geometry: the chain's link-0 capsules."""
    return tuple(lc.capsule for lc in chain.capsules if lc.link == 0)


def build_design(rho: DesignParams, chain: KinematicChain) -> DualArmDesign:
    b0, b1 = base_transforms(rho)
    return DualArmDesign(params=rho, base_0=b0, base_1=b1,
                         shoulder_capsules=shoulder_capsules(chain))


def dual_fk(q0, q1, rho: DesignParams, chain: KinematicChain) -> tuple[Pose, Pose]:
    """End-effector poses of both arms for one design."""
    b0, b1 = base_transforms(rho)
    return (b0.compose(forward_kinematics(chain, q0)),
            b1.compose(forward_kinematics(chain, q1)))


def design_feasible(rho: DesignParams, chain: KinematicChain,
                    obstacles: ObstacleSet) -> bool:
    """False iff the mounted shoulders collide with each other, the ground
    or the ridge."""
    design = build_design(rho, chain)
    world0 = [c.transformed(design.base_0) for c in design.shoulder_capsules]
    world1 = [c.transformed(design.base_1) for c in design.shoulder_capsules]
    for a in world0:
        for b in world1:
            if capsule_pair_distance(a, b) < 0.0:
                return False
    for c in world0 + world1:
        if obstacles.ground is not None and capsule_halfspace_clearance(c, obstacles.ground) < 0.0:
            return False
        if obstacles.ridge is not None and capsule_intersects_ridge(obstacles.ridge, c):
            return False
    return True


def pair_rng(seed: int, task: Task, rho: DesignParams, pair, arm: int) -> np.random.Generator:
    """Evaluation stream for one (pair, arm); keyed on the pair's pose content
    rather than its list position so task-pair order cannot change scores."""
    pepper, peduncle = pair
    return derive_rng(seed, task.id, rho.as_array(), arm,
                      pepper.rotation, pepper.translation,
                      peduncle.rotation, peduncle.translation)


def evaluate_pair(rho: DesignParams, task: Task, chain: KinematicChain,
                  params: SmmParams, seed: int, pair) -> tuple[TargetEvaluation, TargetEvaluation]:
    """Both arms' target evaluations for one (pepper, peduncle) pair."""
    b0, b1 = base_transforms(rho)
    pepper, peduncle = pair
    ev0 = evaluate_target(chain, b0, pepper, task.obstacles, params,
                          pair_rng(seed, task, rho, pair, 0))
    ev1 = evaluate_target(chain, b1, peduncle, task.obstacles, params,
                          pair_rng(seed, task, rho, pair, 1))
    return ev0, ev1


def _pair_min_score(rho: DesignParams, task: Task, chain: KinematicChain,
                    criterion: str, params: SmmParams, seed: int, pair) -> float:
    """min of the two arms' scores; skips arm 1 when arm 0 already scored 0."""
    b0, b1 = base_transforms(rho)
    pepper, peduncle = pair
    ev0 = evaluate_target(chain, b0, pepper, task.obstacles, params,
                          pair_rng(seed, task, rho, pair, 0))
    s0 = ev0.density if criterion == "density" else ev0.max_mu
    if s0 <= 0.0:
        return 0.0
    ev1 = evaluate_target(chain, b1, peduncle, task.obstacles, params,
                          pair_rng(seed, task, rho, pair, 1))
    s1 = ev1.density if criterion == "density" else ev1.max_mu
    return min(s0, s1)


def dual_task_metric(rho: DesignParams, task: Task, chain: KinematicChain,
                     criterion: str, params: SmmParams, seed: int = 0,
                     executor: Executor | None = None) -> float:
    """Sum over target pairs of the min-combined per-arm score (Task metric).

    An infeasible mount scores exactly 0. Per-pair evaluations are
    independent; with an executor they run concurrently without changing
    the result.
    """
    if not design_feasible(rho, chain, task.obstacles):
        return 0.0
    if not task.pairs:
        return 0.0
    if executor is not None:
        scores = list(executor.map(
            lambda p: _pair_min_score(rho, task, chain, criterion, params, seed, p),
            task.pairs))
    else:
        scores = [_pair_min_score(rho, task, chain, criterion, params, seed, p)
                  for p in task.pairs]
    return math.fsum(scores)
