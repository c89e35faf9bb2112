"""Criterion stage: manipulability scores over the feasible part of a manifold.

A manifold is filtered against joint limits, self-collision and obstacles;
what survives is a set of sub-arcs. Scores are either the arc-length
weighted mean of the Yoshikawa measure (manipulability density) or its
maximum over the feasible samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import ObstacleSet, config_in_collision
from .kinematics import KinematicChain, Pose, geometric_jacobian, with_base
from .smm import SelfMotionManifold, SmmParams, generate_smm

CRITERIA = ("density", "max")


def manipulability(J: np.ndarray) -> float:
    """Yoshikawa measure sqrt(det(J J^T)) via singular values.

    Computed as the product of the six singular values, which is exact and
    avoids negative-determinant noise near rank deficiency; values below
    1e-12 clamp to zero. A Jacobian with fewer than six columns is rank
    deficient by construction and scores zero.
    """
    J = np.asarray(J, dtype=float)
    if J.shape[0] != 6:
        raise ValueError(f"expected a 6-row Jacobian, got {J.shape}")
    if J.shape[1] < 6:
        return 0.0
    s = np.linalg.svd(J, compute_uv=False)
    mu = float(np.prod(s))
    return mu if mu >= 1e-12 else 0.0


def config_manipulability(chain: KinematicChain, q) -> float:
    return manipulability(geometric_jacobian(chain, q))


@dataclass(frozen=True)
class FeasibleArc:
    samples: np.ndarray   # (k, n), ordered along the manifold
    cyclic: bool = False  # True for a fully feasible closed component

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.samples, dtype=float)).copy()
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)


@dataclass(frozen=True)
class FeasibleSet:
    """Collision-free sub-arcs of a manifold (the filtered set)."""

    source: SelfMotionManifold
    arcs: tuple[FeasibleArc, ...]
    total_arc_length: float
    singleton_weight: float

    @property
    def n_samples(self) -> int:
        return sum(a.samples.shape[0] for a in self.arcs)


def _arc_length(samples: np.ndarray, cyclic: bool) -> float:
    if samples.shape[0] < 2:
        return 0.0
    seg = np.linalg.norm(np.diff(samples, axis=0), axis=1)
    total = float(np.sum(seg))
    if cyclic:
        total += float(np.linalg.norm(samples[0] - samples[-1]))
    return total


def _feasible_runs(flags: np.ndarray, closed: bool) -> tuple[list[np.ndarray], bool]:
    """Index runs of feasible samples; closed components merge across the seam.

    Returns (runs, cyclic) where cyclic means the whole closed loop survived.
    """
    if not np.any(flags):
        return [], False
    if np.all(flags):
        return [np.arange(len(flags))], closed
    idx = np.flatnonzero(flags)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    if closed and len(runs) > 1 and flags[0] and flags[-1]:
        runs = [np.concatenate([runs[-1], runs[0]])] + runs[1:-1]
    return runs, False


def filter_manifold(smm: SelfMotionManifold, chain: KinematicChain,
                    obstacles: ObstacleSet) -> FeasibleSet:
    """Drop colliding samples and split each component into maximal sub-arcs."""
    arcs: list[FeasibleArc] = []
    total = 0.0
    for comp in smm.components:
        flags = np.array([config_in_collision(chain, q, obstacles) is None
                          for q in comp.samples])
        runs, cyclic = _feasible_runs(flags, comp.closed)
        for run in runs:
            arc = FeasibleArc(comp.samples[run], cyclic=cyclic)
            arcs.append(arc)
            total += _arc_length(arc.samples, arc.cyclic)
    return FeasibleSet(source=smm, arcs=tuple(arcs), total_arc_length=total,
                       singleton_weight=smm.dedupe_radius)


def arc_trapezoid(samples: np.ndarray, values: np.ndarray, cyclic: bool) -> tuple[float, float]:
    """(integral of values along the arc, arc length) by trapezoidal quadrature."""
    k = samples.shape[0]
    if k < 2:
        return 0.0, 0.0
    seg = np.linalg.norm(np.diff(samples, axis=0), axis=1)
    mid = 0.5 * (values[:-1] + values[1:])
    integral = float(np.sum(mid * seg))
    length = float(np.sum(seg))
    if cyclic:
        seam = float(np.linalg.norm(samples[0] - samples[-1]))
        integral += 0.5 * (values[0] + values[-1]) * seam
        length += seam
    return integral, length


def manipulability_density(feasible: FeasibleSet, chain: KinematicChain) -> float:
    """Arc-length weighted mean of the Yoshikawa measure over the feasible set.

    Isolated single-sample arcs contribute their point value with the
    manifold dedupe radius as weight, so a barely-feasible reach still
    registers. An empty set scores zero.
    """
    integral = 0.0
    length = 0.0
    for arc in feasible.arcs:
        mu = np.array([config_manipulability(chain, q) for q in arc.samples])
        if arc.samples.shape[0] == 1:
            integral += float(mu[0]) * feasible.singleton_weight
            length += feasible.singleton_weight
        else:
            i, l = arc_trapezoid(arc.samples, mu, arc.cyclic)
            integral += i
            length += l
    if length <= 0.0:
        return 0.0
    return integral / length


def max_manipulability(feasible: FeasibleSet, chain: KinematicChain) -> float:
    """Highest Yoshikawa measure over the feasible samples; zero when empty."""
    best = 0.0
    for arc in feasible.arcs:
        for q in arc.samples:
            best = max(best, config_manipulability(chain, q))
    return best


@dataclass(frozen=True)
class TargetEvaluation:
    """Per-target summary used by both criteria and the reach statistics."""

    n_feasible_samples: int
    total_arc_length: float
    density: float
    max_mu: float

    @property
    def reachable(self) -> bool:
        return self.n_feasible_samples > 0


def evaluate_target(chain: KinematicChain, base: Pose, target: Pose,
                    obstacles: ObstacleSet, params: SmmParams,
                    rng: np.random.Generator, rows=None) -> TargetEvaluation:
    """Generate -> filter -> score one reach target for a chain mounted at base."""
    mounted = with_base(chain, base)
    smm = generate_smm(mounted, target, params, rng, rows)
    feasible = filter_manifold(smm, mounted, obstacles)
    return TargetEvaluation(
        n_feasible_samples=feasible.n_samples,
        total_arc_length=feasible.total_arc_length,
        density=manipulability_density(feasible, mounted),
        max_mu=max_manipulability(feasible, mounted),
    )


def single_target_metric(chain: KinematicChain, base: Pose, target: Pose,
                         obstacles: ObstacleSet, criterion: str,
                         params: SmmParams, rng: np.random.Generator,
                         rows=None) -> float:
    """Three-stage task metric for one target; degenerate cases score zero."""
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    ev = evaluate_target(chain, base, target, obstacles, params, rng, rows)
    return ev.density if criterion == "density" else ev.max_mu
