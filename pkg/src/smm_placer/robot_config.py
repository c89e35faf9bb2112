"""Robot description files: a versioned YAML schema for serial revolute chains.

Schema (version 1)::

    schema_version: 1
    name: <identifier>
    joints:                      # ordered base -> tip
      - xyz: [x, y, z]           # m, fixed offset before the joint
        rpy: [roll, pitch, yaw]  # rad, fixed rotation before the joint
        axis: [x, y, z]          # unit rotation axis in the joint frame
        limits: [lower, upper]   # rad
    tool: {xyz: [...], rpy: [...]}
    capsules:                    # link 0 = immobile base, link i = after joint i
      - {link: i, a: [x, y, z], b: [x, y, z], radius: r}
    collision_exempt:            # capsule index pairs the self-collision
      - [i, j]                   # filter skips (adjacent bodies)

The shipped ``xarm7-like`` description approximates a 7-DOF xArm7 from the
vendor's public datasheet; link lengths and limits are not calibrated
against hardware.
"""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import yaml

from .errors import ParseError
from .collision import Capsule
from .kinematics import KinematicChain, LinkCapsule, Pose, RevoluteJoint, identity, rpy

SCHEMA_VERSION = 1


def _vec(node, key, where):
    try:
        v = node[key]
    except (KeyError, TypeError):
        raise ParseError(f"{where}: missing field '{key}'")
    if not isinstance(v, list) or len(v) != 3:
        raise ParseError(f"{where}: field '{key}' must be a 3-element list")
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError):
        raise ParseError(f"{where}: field '{key}' must be numeric")


def _transform(node, where) -> Pose:
    xyz = _vec(node, "xyz", where)
    r, p, y = _vec(node, "rpy", where)
    return Pose(rpy(r, p, y).rotation, xyz)


def load_robot_config(path) -> KinematicChain:
    """Parse a robot description file into a KinematicChain."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read robot config {path}: {e}")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"{path}: invalid YAML: {e}")
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a mapping at top level")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"{path}: missing or unsupported schema_version "
                         f"(expected {SCHEMA_VERSION})")
    name = str(doc.get("name", path.stem))
    joints_node = doc.get("joints")
    if not isinstance(joints_node, list) or not joints_node:
        raise ParseError(f"{path}: missing or empty 'joints' list")
    joints = []
    for i, jn in enumerate(joints_node):
        where = f"{path}: joints[{i}]"
        limits = jn.get("limits")
        if not isinstance(limits, list) or len(limits) != 2:
            raise ParseError(f"{where}: field 'limits' must be [lower, upper]")
        try:
            joints.append(RevoluteJoint(
                origin=_transform(jn, where),
                axis=_vec(jn, "axis", where),
                lower=float(limits[0]),
                upper=float(limits[1]),
            ))
        except ValueError as e:
            raise ParseError(f"{where}: {e}")
    tool = identity()
    if "tool" in doc:
        tool = _transform(doc["tool"], f"{path}: tool")
    capsules = []
    for i, cn in enumerate(doc.get("capsules", [])):
        where = f"{path}: capsules[{i}]"
        link = cn.get("link")
        if not isinstance(link, int) or not 0 <= link <= len(joints):
            raise ParseError(f"{where}: 'link' must be an integer in [0, {len(joints)}]")
        try:
            cap = Capsule(_vec(cn, "a", where), _vec(cn, "b", where),
                          float(cn.get("radius", 0.0)))
        except (TypeError, ValueError) as e:
            raise ParseError(f"{where}: {e}")
        capsules.append(LinkCapsule(link, cap))
    exempt = []
    for i, pair in enumerate(doc.get("collision_exempt", [])):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(f"{path}: collision_exempt[{i}] must be a pair")
        a, b = int(pair[0]), int(pair[1])
        if not (0 <= a < len(capsules) and 0 <= b < len(capsules)):
            raise ParseError(f"{path}: collision_exempt[{i}] references a missing capsule")
        exempt.append((a, b))
    return KinematicChain(joints=tuple(joints), tool=tool, capsules=tuple(capsules),
                          collision_exempt=frozenset(exempt), name=name)


def builtin_robot_path(name: str = "xarm7_like") -> Path:
    """Filesystem path of a robot description shipped with the package."""
    res = importlib.resources.files("smm_placer") / "data" / f"{name}.yaml"
    with importlib.resources.as_file(res) as p:
        return Path(p)


def load_builtin_robot(name: str = "xarm7_like") -> KinematicChain:
    return load_robot_config(builtin_robot_path(name))
