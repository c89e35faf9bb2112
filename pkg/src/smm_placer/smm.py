"""Self-motion manifolds: the complete inverse-kinematics solution set of a
redundancy-1 chain for one target pose.

Generation is two-phase: damped-least-squares IK from random restarts finds
seed solutions, then each seed is continued along the Jacobian null-space
direction with Newton re-projection until the curve closes on itself, hits a
joint limit in both directions, or reaches a rank-deficient configuration.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, SingularityError
from .kinematics import (
    KinematicChain,
    Pose,
    _pose_jac_raw,
    rotation_vector,
)

log = logging.getLogger("smm_placer.smm")

SINGULAR_SV_TOL = 1e-8   # smallest task singular value treated as rank loss
_MAX_DLS_STEP = 0.5      # rad, per-iteration joint-step cap


@dataclass(frozen=True)
class SmmParams:
    """Tolerances and budgets for manifold generation."""

    ik_restarts: int = 50
    ik_max_iters: int = 100
    ik_damping: float = 0.05
    pos_tol: float = 1e-4
    ori_tol: float = 1e-3
    continuation_step: float = 0.02
    max_samples_per_component: int = 1000
    dedupe_radius: float = 0.05

    def __post_init__(self):
        if not (self.pos_tol > 0.0 and self.ori_tol > 0.0):
            raise ValueError("pose tolerances must be positive")
        if not self.continuation_step > 0.0:
            raise ValueError("continuation_step must be positive")
        if self.ik_restarts < 1:
            raise ValueError("ik_restarts must be at least 1")
        if not self.dedupe_radius > 0.0:
            raise ValueError("dedupe_radius must be positive")


@dataclass(frozen=True)
class ManifoldComponent:
    samples: np.ndarray  # (k, n) joint configs ordered along the curve
    closed: bool

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.samples, dtype=float)).copy()
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)


@dataclass(frozen=True)
class SelfMotionManifold:
    target: Pose
    components: tuple[ManifoldComponent, ...]
    chain_id: str
    dedupe_radius: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n_samples(self) -> int:
        return sum(c.samples.shape[0] for c in self.components)

    def all_samples(self) -> np.ndarray:
        if not self.components:
            return np.empty((0, 0))
        return np.vstack([c.samples for c in self.components])


def _norm_rows(rows, chain: KinematicChain) -> tuple[int, ...]:
    if rows is None:
        return (0, 1, 2, 3, 4, 5)
    out = tuple(sorted(set(int(r) for r in rows)))
    if not out or any(r < 0 or r > 5 for r in out):
        raise ValueError("task rows must be a subset of 0..5")
    return out


def _task_error(R_ee, t_ee, target: Pose) -> np.ndarray:
    e = np.empty(6)
    e[:3] = target.translation - t_ee
    e[3:] = rotation_vector(target.rotation @ R_ee.T)
    return e


def _split_errors(e6: np.ndarray, rows: tuple[int, ...]) -> tuple[float, float]:
    pos = [r for r in rows if r < 3]
    ang = [r for r in rows if r >= 3]
    pe = float(np.linalg.norm(e6[pos])) if pos else 0.0
    oe = float(np.linalg.norm(e6[ang])) if ang else 0.0
    return pe, oe


def _dls_iterate(chain: KinematicChain, target: Pose, q0: np.ndarray,
                 params: SmmParams, rows: tuple[int, ...],
                 max_iters: int) -> tuple[np.ndarray, bool]:
    """Damped-least-squares descent to the target, clamped to joint limits."""
    q = chain.clamp(q0)
    lam2 = params.ik_damping ** 2
    m = len(rows)
    damp = lam2 * np.eye(m)
    rows_idx = list(rows)
    for _ in range(max_iters):
        R_ee, t_ee, J6 = _pose_jac_raw(chain, q)
        e6 = _task_error(R_ee, t_ee, target)
        pe, oe = _split_errors(e6, rows)
        if pe <= params.pos_tol and oe <= params.ori_tol:
            return q, True
        J = J6[rows_idx]
        e = e6[rows_idx]
        try:
            y = np.linalg.solve(J @ J.T + damp, e)
        except np.linalg.LinAlgError:
            return q, False
        dq = J.T @ y
        step = np.linalg.norm(dq)
        if step > _MAX_DLS_STEP:
            dq *= _MAX_DLS_STEP / step
        q = chain.clamp(q + dq)
    return q, False


def seed_ik(chain: KinematicChain, target: Pose, params: SmmParams,
            rng: np.random.Generator, rows=None) -> list[np.ndarray]:
    """Converged IK solutions from ik_restarts random-restart DLS runs.

    Returns every run that reached the pose tolerance inside the joint
    limits; an unreachable target yields an empty list. Restart seeds are
    drawn uniformly within limits, one config per restart, so a longer run
    extends a shorter one with the same rng state.
    """
    rows = _norm_rows(rows, chain)
    reach_check = {0, 1, 2} <= set(rows)
    if reach_check:
        gap = np.linalg.norm(target.translation - chain.base.translation)
        if gap > chain.max_reach + params.pos_tol:
            # still consume the restart draws so rng streams stay aligned
            for _ in range(params.ik_restarts):
                chain.sample_config(rng)
            return []
    solutions = []
    for _ in range(params.ik_restarts):
        q0 = chain.sample_config(rng)
        q, ok = _dls_iterate(chain, target, q0, params, rows, params.ik_max_iters)
        if ok and chain.within_limits(q):
            solutions.append(q)
    return solutions


def _project(chain: KinematicChain, target: Pose, q_pred: np.ndarray,
             params: SmmParams, rows: tuple[int, ...]) -> tuple[np.ndarray, bool]:
    return _dls_iterate(chain, target, q_pred, params, rows, params.ik_max_iters)


def _null_direction(chain: KinematicChain, q: np.ndarray,
                    rows: tuple[int, ...]) -> tuple[np.ndarray, float]:
    """Unit null-space direction of the task Jacobian and its smallest
    retained singular value (rank sentinel)."""
    _, _, J6 = _pose_jac_raw(chain, q)
    _, S, Vt = np.linalg.svd(J6[list(rows)])
    return Vt[-1], float(S[-1])


def _trace_direction(chain, target, start, direction, params, rows):
    """March from start along one null-space sign.

    Returns (samples beyond start, closed). Termination: loop closure back
    to start, joint-limit boundary, rank-deficient sample, projection
    failure, or the per-component sample budget.
    """
    h = params.continuation_step
    samples: list[np.ndarray] = []
    q = start
    u = direction
    arc = 0.0
    while len(samples) < params.max_samples_per_component:
        accepted = None
        step = h
        reason = "joint-limit boundary"
        for _ in range(4):
            q_pred = q + step * u
            if not chain.within_limits(q_pred):
                step *= 0.5
                continue
            q_new, ok = _project(chain, target, q_pred, params, rows)
            if not ok:
                reason = "projection failure"
                step *= 0.5
                continue
            moved = float(np.linalg.norm(q_new - q))
            if moved > 2.0 * h or moved < 0.05 * h:
                reason = "projection step out of bounds"
                step *= 0.5
                continue
            accepted = q_new
            break
        if accepted is None:
            if reason != "joint-limit boundary":
                log.debug("trace truncated after %d samples: %s", len(samples), reason)
            return samples, False
        arc += float(np.linalg.norm(accepted - q))
        samples.append(accepted)
        if arc > 2.5 * h and float(np.linalg.norm(accepted - start)) <= h:
            return samples, True
        u_new, smin = _null_direction(chain, accepted, rows)
        if smin < SINGULAR_SV_TOL:
            log.debug("trace stopped at rank-deficient sample (sv=%.2e)", smin)
            return samples, False
        if float(u_new @ (accepted - q)) < 0.0:
            u_new = -u_new
        q = accepted
        u = u_new
    log.debug("trace stopped at sample budget %d", params.max_samples_per_component)
    return samples, False


def trace_component(chain: KinematicChain, target: Pose, seed,
                    params: SmmParams, rows=None) -> ManifoldComponent:
    """Trace the connected manifold component through one seed solution.

    The seed must already satisfy the membership tolerance. Both null-space
    signs are traced unless the forward sweep closes the loop first.
    """
    rows = _norm_rows(rows, chain)
    q0 = chain.check_config(seed)
    if chain.n_joints - len(rows) != 1:
        raise ValueError("continuation needs task redundancy exactly 1")
    R_ee, t_ee, _ = _pose_jac_raw(chain, q0)
    pe, oe = _split_errors(_task_error(R_ee, t_ee, target), rows)
    if pe > params.pos_tol or oe > params.ori_tol or not chain.within_limits(q0):
        raise ValueError("trace seed does not satisfy the manifold membership tolerance")
    u0, smin = _null_direction(chain, q0, rows)
    if smin < SINGULAR_SV_TOL:
        raise SingularityError("trace seed is rank-deficient; null space is not 1-dimensional",
                               config=q0)
    forward, closed = _trace_direction(chain, target, q0, u0, params, rows)
    if closed:
        return ManifoldComponent(np.vstack([q0[None, :]] + [s[None, :] for s in forward]),
                                 closed=True)
    backward, _ = _trace_direction(chain, target, q0, -u0, params, rows)
    chunks = [s[None, :] for s in reversed(backward)] + [q0[None, :]] + \
             [s[None, :] for s in forward]
    return ManifoldComponent(np.vstack(chunks), closed=False)


def generate_smm(chain: KinematicChain, target: Pose, params: SmmParams,
                 rng: np.random.Generator, rows=None) -> SelfMotionManifold:
    """Seed, dedupe and trace every reachable manifold component."""
    rows = _norm_rows(rows, chain)
    if chain.n_joints - len(rows) != 1:
        raise ValueError("manifold generation needs task redundancy exactly 1")
    seeds = seed_ik(chain, target, params, rng, rows)
    components: list[ManifoldComponent] = []
    known: np.ndarray | None = None
    for s in seeds:
        if known is not None:
            if float(np.min(np.linalg.norm(known - s, axis=1))) < params.dedupe_radius:
                continue
        try:
            comp = trace_component(chain, target, s, params, rows)
        except SingularityError:
            log.debug("seed discarded: rank-deficient start")
            continue
        components.append(comp)
        known = comp.samples if known is None else np.vstack([known, comp.samples])
    return SelfMotionManifold(target=target, components=tuple(components),
                              chain_id=chain.name, dedupe_radius=params.dedupe_radius)


def save_manifold(manifold: SelfMotionManifold, path) -> None:
    doc = {
        "schema": "smm-placer-manifold-v1",
        "chain_id": manifold.chain_id,
        "dedupe_radius": manifold.dedupe_radius,
        "target": {
            "rotation": manifold.target.rotation.tolist(),
            "translation": manifold.target.translation.tolist(),
        },
        "components": [
            {"closed": c.closed, "samples": c.samples.tolist()}
            for c in manifold.components
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_manifold(path) -> SelfMotionManifold:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot load manifold {p}: {e}")
    if doc.get("schema") != "smm-placer-manifold-v1":
        raise ParseError(f"{p}: missing or unsupported manifold schema")
    try:
        target = Pose(np.array(doc["target"]["rotation"]),
                      np.array(doc["target"]["translation"]))
        comps = tuple(ManifoldComponent(np.array(c["samples"]), bool(c["closed"]))
                      for c in doc["components"])
        return SelfMotionManifold(target, comps, str(doc["chain_id"]),
                                  float(doc.get("dedupe_radius", 0.05)))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{p}: malformed manifold file: {e}")
