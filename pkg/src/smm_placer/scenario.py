"""Task and environment model: the ridge canopy, the generative pepper
sampler and the on-disk task format.

A task is a list of (pepper, peduncle) frame pairs inside the ridge plus
the obstacle set (ground plane and ridge). Pepper orientations carry two
Gaussian-perturbed rotations; the peduncle cut frame sits a fixed offset
along the pepper frame's y-axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .collision import HalfSpace, ObstacleSet, SemiEllipticCylinder, ridge_contains
from .errors import ParseError
from .kinematics import Pose, rot_x, rot_y, translation

TASK_SCHEMA = "smm-placer-task-v1"


def default_ridge() -> SemiEllipticCylinder:
    return SemiEllipticCylinder(center=(1.0, 0.0, 0.0), height=0.8, width=0.6, length=0.6)


def default_obstacles(ridge: SemiEllipticCylinder | None = None) -> ObstacleSet:
    return ObstacleSet(ground=HalfSpace((0.0, 0.0, 1.0), 0.0),
                       ridge=ridge if ridge is not None else default_ridge())


@dataclass(frozen=True)
class CanopyConfig:
    """Generative model for synthetic pepper targets inside the ridge."""

    ridge: SemiEllipticCylinder = field(default_factory=default_ridge)
    peduncle_offset: float = 0.12
    delta1_std: float = 0.35
    delta2_std: float = 0.5
    n_targets: int = 20
    margin: float = 0.02  # keep-out from the ridge surface

    def __post_init__(self):
        if not self.peduncle_offset > 0.0:
            raise ValueError("peduncle_offset must be positive")
        if self.delta1_std < 0.0 or self.delta2_std < 0.0:
            raise ValueError("orientation stds must be non-negative")
        if self.n_targets < 0:
            raise ValueError("n_targets must be non-negative")


@dataclass(frozen=True)
class Task:
    """Reach task: (pepper, peduncle) pose pairs plus the obstacle set."""

    pairs: tuple[tuple[Pose, Pose], ...]
    obstacles: ObstacleSet
    seed: int
    id: str
    peduncle_offset: float = 0.12

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((p, c) for p, c in self.pairs))


def sample_pepper(cfg: CanopyConfig, rng: np.random.Generator) -> tuple[Pose, Pose]:
    """One (pepper, peduncle) frame pair, position uniform in the shrunk ridge.

    Rejection-samples the position in the ridge volume pulled in by the
    surface margin, then perturbs the canonical orientation by the two
    Gaussian angles.
    """
    r = cfg.ridge
    m = cfg.margin
    ax = r.width / 2.0 - m   # horizontal semi-axis after shrink
    az = r.height - m        # vertical semi-axis after shrink
    hy = r.length / 2.0 - m
    if ax <= 0.0 or hy <= 0.0 or az <= m:
        raise ValueError("sampling margin leaves an empty ridge interior")
    cx, cy, cz = r.center
    while True:
        x = rng.uniform(cx - ax, cx + ax)
        y = rng.uniform(cy - hy, cy + hy)
        z = rng.uniform(cz + m, cz + az)
        if ((x - cx) / ax) ** 2 + ((z - cz) / az) ** 2 <= 1.0:
            break
    d1 = rng.normal(0.0, cfg.delta1_std)
    d2 = rng.normal(0.0, cfg.delta2_std)
    half_pi = math.pi / 2.0
    pepper = translation(x, y, z).compose(rot_x(half_pi + d1)).compose(rot_y(half_pi + d2))
    peduncle = pepper.compose(translation(0.0, cfg.peduncle_offset, 0.0))
    return pepper, peduncle


def generate_task(cfg: CanopyConfig, seed: int, task_id: str) -> Task:
    """Deterministic task with n_targets pairs and the standard obstacle set."""
    rng = np.random.default_rng(seed)
    pairs = tuple(sample_pepper(cfg, rng) for _ in range(cfg.n_targets))
    return Task(pairs=pairs, obstacles=default_obstacles(cfg.ridge),
                seed=seed, id=task_id, peduncle_offset=cfg.peduncle_offset)


def _pose_doc(p: Pose) -> dict:
    return {"rotation": p.rotation.tolist(), "translation": p.translation.tolist()}


def _pose_from(doc, where: str) -> Pose:
    try:
        return Pose(np.array(doc["rotation"], dtype=float),
                    np.array(doc["translation"], dtype=float))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{where}: bad pose: {e}")


def save_task(task: Task, path) -> None:
    obstacles = {}
    if task.obstacles.ground is not None:
        obstacles["ground"] = {"normal": task.obstacles.ground.normal.tolist(),
                               "offset": task.obstacles.ground.offset}
    if task.obstacles.ridge is not None:
        r = task.obstacles.ridge
        obstacles["ridge"] = {"center": r.center.tolist(), "height": r.height,
                              "width": r.width, "length": r.length}
    obstacles["ridge_scope"] = sorted(task.obstacles.ridge_scope)
    doc = {
        "schema": TASK_SCHEMA,
        "id": task.id,
        "seed": task.seed,
        "peduncle_offset": task.peduncle_offset,
        "obstacles": obstacles,
        "pairs": [{"pepper": _pose_doc(p), "peduncle": _pose_doc(c)}
                  for p, c in task.pairs],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_task(path) -> Task:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as e:
        raise ParseError(f"cannot read task file {p}: {e}")
    except json.JSONDecodeError as e:
        raise ParseError(f"{p}: invalid JSON: {e}")
    if doc.get("schema") != TASK_SCHEMA:
        raise ParseError(f"{p}: missing or unsupported task schema")
    for section in ("id", "seed", "peduncle_offset", "obstacles", "pairs"):
        if section not in doc:
            raise ParseError(f"{p}: missing section '{section}'")
    on = doc["obstacles"]
    ground = None
    if "ground" in on:
        try:
            ground = HalfSpace(np.array(on["ground"]["normal"], dtype=float),
                               float(on["ground"]["offset"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{p}: obstacles.ground: {e}")
    ridge = None
    if "ridge" in on:
        try:
            rn = on["ridge"]
            ridge = SemiEllipticCylinder(np.array(rn["center"], dtype=float),
                                         float(rn["height"]), float(rn["width"]),
                                         float(rn["length"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{p}: obstacles.ridge: {e}")
    scope = frozenset(int(i) for i in on.get("ridge_scope", [0]))
    obstacles = ObstacleSet(ground=ground, ridge=ridge, ridge_scope=scope)
    d = float(doc["peduncle_offset"])
    offset = translation(0.0, d, 0.0)
    pairs = []
    for i, pr in enumerate(doc["pairs"]):
        where = f"{p}: pairs[{i}]"
        if "pepper" not in pr or "peduncle" not in pr:
            raise ParseError(f"{where}: needs 'pepper' and 'peduncle' poses")
        pepper = _pose_from(pr["pepper"], where)
        peduncle = _pose_from(pr["peduncle"], where)
        expected = pepper.compose(offset)
        if not expected.almost_equal(peduncle, tol=1e-9):
            raise ParseError(f"{where}: peduncle frame is not the pepper frame "
                             f"offset by {d} along its y-axis")
        if ridge is not None and not ridge_contains(ridge, pepper.translation):
            raise ParseError(f"{where}: pepper position lies outside the ridge")
        pairs.append((pepper, peduncle))
    return Task(pairs=tuple(pairs), obstacles=obstacles, seed=int(doc["seed"]),
                id=str(doc["id"]), peduncle_offset=d)
