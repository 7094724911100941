"""Serial kinematic chains: description loading, FK, Jacobians, gantry composition.

Each joint carries a fixed ``origin`` transform from its parent link, followed by
a rotation about (revolute) or translation along (prismatic) its ``axis``. The
axis is expressed in the joint frame reached after applying ``origin``, as in
URDF. Link ``i`` is the frame that moves with joint ``i``; the end-effector
frame is ``link[end_effector_link] * tool``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
import yaml

from .errors import DimensionMismatch, ParseError, ValidationError
from .transforms import Pose, mm, mv, skew

_NORM_TOL = 1e-9


class JointKind(str, Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"


@dataclass(frozen=True)
class JointLimits:
    lower: float
    upper: float
    max_velocity: float = math.pi
    max_acceleration: float = 10.0
    max_jerk: float = 100.0

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValidationError(f"inverted limits [{self.lower}, {self.upper}]")
        for name in ("max_velocity", "max_acceleration", "max_jerk"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be strictly positive")


@dataclass(frozen=True, eq=False)
class JointSpec:
    name: str
    kind: JointKind
    axis: np.ndarray
    origin: Pose = field(default_factory=Pose)
    limits: JointLimits = field(default_factory=lambda: JointLimits(-math.pi, math.pi))

    def __post_init__(self):
        object.__setattr__(self, "kind", JointKind(self.kind))
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > _NORM_TOL:
            raise ValidationError(f"joint {self.name!r}: axis {axis} is not unit length")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)

    @property
    def prismatic(self) -> bool:
        return self.kind is JointKind.PRISMATIC


@dataclass(frozen=True, eq=False)
class CollisionSphere:
    link_index: int
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValidationError(f"sphere radius must be positive, got {self.radius}")


class Kinematics(NamedTuple):
    """Batched kinematic state; leading dims match the query batch."""

    link_rot: np.ndarray  # (..., D, 3, 3)
    link_pos: np.ndarray  # (..., D, 3)
    joint_axis: np.ndarray  # (..., D, 3) world-frame axes
    joint_pos: np.ndarray  # (..., D, 3) world-frame joint origins
    ee_rot: np.ndarray  # (..., 3, 3)
    ee_pos: np.ndarray  # (..., 3)


@dataclass(frozen=True, eq=False)
class RobotModel:
    joints: tuple[JointSpec, ...]
    spheres: tuple[CollisionSphere, ...] = ()
    self_collision_ignore: frozenset = frozenset()
    end_effector_link: int = -1
    tool: Pose = field(default_factory=Pose)
    base: Pose = field(default_factory=Pose)
    name: str = "robot"
    home_pose: Pose | None = None

    def __post_init__(self):
        joints = tuple(self.joints)
        if len(joints) < 1:
            raise ValidationError("robot needs at least one joint")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "spheres", tuple(self.spheres))
        dof = len(joints)
        ee = self.end_effector_link
        if ee < 0:
            ee += dof
        if not 0 <= ee < dof:
            raise ValidationError(f"end_effector_link {self.end_effector_link} out of range")
        object.__setattr__(self, "end_effector_link", ee)
        for s in self.spheres:
            if not 0 <= s.link_index < dof:
                raise ValidationError(f"sphere references link {s.link_index} of a {dof}-joint chain")
        ignore = set()
        for pair in self.self_collision_ignore:
            i, j = (int(x) for x in pair)
            if not (0 <= i < dof and 0 <= j < dof):
                raise ValidationError(f"self_collision_ignore pair {pair} out of range")
            ignore.add((min(i, j), max(i, j)))
        for i in range(dof - 1):
            ignore.add((i, i + 1))
        object.__setattr__(self, "self_collision_ignore", frozenset(ignore))
        self._precompute()

    # -- cached arrays -------------------------------------------------------------
    def _precompute(self):
        dof = self.dof
        o_rot = np.stack([j.origin.rotation for j in self.joints])
        o_pos = np.stack([j.origin.position for j in self.joints])
        axes = np.stack([j.axis for j in self.joints])
        k = skew(axes)
        cache = {
            "o_rot": o_rot,
            "o_pos": o_pos,
            "axes": axes,
            "o_axis": mv(o_rot, axes),
            "ok": mm(o_rot, k),
            "okk": mm(o_rot, mm(k, k)),
            "prismatic": np.array([j.prismatic for j in self.joints]),
            "lower": np.array([j.limits.lower for j in self.joints]),
            "upper": np.array([j.limits.upper for j in self.joints]),
            "max_velocity": np.array([j.limits.max_velocity for j in self.joints]),
            "max_acceleration": np.array([j.limits.max_acceleration for j in self.joints]),
            "max_jerk": np.array([j.limits.max_jerk for j in self.joints]),
            "sphere_link": np.array([s.link_index for s in self.spheres], dtype=np.intp),
            "sphere_center": np.array([s.center for s in self.spheres]).reshape(-1, 3),
            "sphere_radius": np.array([s.radius for s in self.spheres], dtype=float),
        }
        links = cache["sphere_link"]
        pairs = [
            (a, b)
            for a in range(len(self.spheres))
            for b in range(a + 1, len(self.spheres))
            if links[a] != links[b]
            and (min(links[a], links[b]), max(links[a], links[b])) not in self.self_collision_ignore
        ]
        cache["self_pairs"] = np.array(pairs, dtype=np.intp).reshape(-1, 2)
        # ancestry[s, j]: joint j moves sphere s
        cache["sphere_ancestry"] = np.arange(dof)[None, :] <= links[:, None]
        for arr in cache.values():
            arr.setflags(write=False)
        object.__setattr__(self, "_cache", cache)

    def __getattr__(self, item):
        cache = self.__dict__.get("_cache")
        if cache is not None and item in cache:
            return cache[item]
        raise AttributeError(item)

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def n_spheres(self) -> int:
        return len(self.spheres)

    def check_config(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.dof,):
            raise DimensionMismatch(f"expected {self.dof} joint values, got shape {q.shape}")
        return q

    def within_limits(self, q, tol: float = 1e-12) -> np.ndarray:
        q = self.check_config(q)
        return np.all((q >= self.lower - tol) & (q <= self.upper + tol), axis=-1)

    def clamp(self, q) -> np.ndarray:
        return np.clip(self.check_config(q), self.lower, self.upper)

    def replace(self, **changes) -> "RobotModel":
        return replace(self, **changes)

    # -- kinematics ----------------------------------------------------------------
    def kinematics(self, q) -> Kinematics:
        """Forward kinematics for a batch of configurations ``(..., D)``."""
        q = self.check_config(q)
        lead = q.shape[:-1]
        c = self._cache
        rot = np.broadcast_to(self.base.rotation, lead + (3, 3))
        pos = np.broadcast_to(self.base.position, lead + (3,))
        link_rot, link_pos, ax, jp = [], [], [], []
        for i in range(self.dof):
            qi = q[..., i, None, None]
            jpos = pos + mv(rot, c["o_pos"][i])
            axis_w = mv(rot, c["o_axis"][i])
            if c["prismatic"][i]:
                local = np.broadcast_to(c["o_rot"][i], lead + (3, 3))
                pos = jpos + axis_w * q[..., i, None]
            else:
                local = c["o_rot"][i] + np.sin(qi) * c["ok"][i] + (1.0 - np.cos(qi)) * c["okk"][i]
                pos = jpos
            rot = mm(rot, local)
            link_rot.append(rot)
            link_pos.append(pos)
            ax.append(axis_w)
            jp.append(jpos)
        link_rot = np.stack(link_rot, axis=-3)
        link_pos = np.stack(link_pos, axis=-2)
        e = self.end_effector_link
        ee_rot = mm(link_rot[..., e, :, :], self.tool.rotation)
        ee_pos = link_pos[..., e, :] + mv(link_rot[..., e, :, :], self.tool.position)
        return Kinematics(link_rot, link_pos, np.stack(ax, axis=-2), np.stack(jp, axis=-2), ee_rot, ee_pos)

    def sphere_centers(self, kin: Kinematics) -> np.ndarray:
        """World sphere centers ``(..., S, 3)``."""
        links = self._cache["sphere_link"]
        r = kin.link_rot[..., links, :, :]
        p = kin.link_pos[..., links, :]
        return p + mv(r, self._cache["sphere_center"])

    def ee_jacobian(self, kin: Kinematics) -> np.ndarray:
        """Batched 6xD Jacobian at the end-effector origin (linear rows first)."""
        ax = kin.joint_axis
        lead = ax.shape[:-2]
        arm = kin.ee_pos[..., None, :] - kin.joint_pos
        lin = np.where(self._cache["prismatic"][:, None], ax, np.cross(ax, arm))
        ang = np.where(self._cache["prismatic"][:, None], 0.0, ax)
        mask = (np.arange(self.dof) <= self.end_effector_link)[:, None]
        jac = np.concatenate([lin * mask, ang * mask], axis=-1)  # (..., D, 6)
        return np.swapaxes(jac, -1, -2).reshape(lead + (6, self.dof))

    def joint_angular_axes(self, kin: Kinematics) -> np.ndarray:
        """Angular Jacobian columns of the end-effector, ``(..., D, 3)``."""
        mask = (~self._cache["prismatic"]) & (np.arange(self.dof) <= self.end_effector_link)
        return kin.joint_axis * mask[:, None]


def forward_kinematics(robot: RobotModel, q) -> list[Pose]:
    """Per-link poses, with the end-effector pose appended last."""
    q = robot.check_config(q)
    if q.ndim != 1:
        raise DimensionMismatch("forward_kinematics takes a single configuration")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint values must be finite")
    kin = robot.kinematics(q)
    poses = [Pose.from_matrix(kin.link_rot[i], kin.link_pos[i]) for i in range(robot.dof)]
    poses.append(Pose.from_matrix(kin.ee_rot, kin.ee_pos))
    return poses


def end_effector_pose(robot: RobotModel, q) -> Pose:
    kin = robot.kinematics(robot.check_config(q))
    return Pose.from_matrix(kin.ee_rot, kin.ee_pos)


def jacobian(robot: RobotModel, q) -> np.ndarray:
    q = robot.check_config(q)
    if q.ndim != 1:
        raise DimensionMismatch("jacobian takes a single configuration")
    return robot.ee_jacobian(robot.kinematics(q))


def compose_gantry_chain(
    base: RobotModel, gantry: JointSpec, gantry_spheres: Sequence[CollisionSphere] = ()
) -> RobotModel:
    """Prepend a prismatic axis to ``base``; gantry spheres live on link 0."""
    if not gantry.prismatic:
        raise ValidationError("gantry joint must be prismatic")
    for s in gantry_spheres:
        if s.link_index != 0:
            raise ValidationError("gantry spheres must reference link 0 (the carriage)")
    shifted = [CollisionSphere(s.link_index + 1, s.center, s.radius) for s in base.spheres]
    ignore = {(i + 1, j + 1) for i, j in base.self_collision_ignore}
    ignore.add((0, 1))
    return RobotModel(
        joints=(gantry,) + base.joints,
        spheres=tuple(gantry_spheres) + tuple(shifted),
        self_collision_ignore=frozenset(ignore),
        end_effector_link=base.end_effector_link + 1,
        tool=base.tool,
        base=base.base,
        name=f"{base.name}_gantry",
        home_pose=base.home_pose,
    )


def translate_base(robot: RobotModel, offset) -> RobotModel:
    """Copy of ``robot`` with its mounting pose shifted by ``offset`` (world frame)."""
    return robot.replace(base=robot.base.translated(offset))


# -- documents -----------------------------------------------------------------------

def _vec(value, n: int, what: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ParseError(f"{what}: expected a list of {n} numbers, got {value!r}")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: non-numeric entry in {value!r}") from exc


def _pose(d, what: str) -> Pose:
    if d is None:
        return Pose()
    if not isinstance(d, dict):
        raise ParseError(f"{what}: expected mapping with xyz/quat")
    xyz = _vec(d.get("xyz", [0, 0, 0]), 3, f"{what}.xyz")
    quat = _vec(d.get("quat", [1, 0, 0, 0]), 4, f"{what}.quat")
    if abs(np.linalg.norm(quat) - 1.0) > 1e-6:
        raise ValidationError(f"{what}.quat is not a unit quaternion")
    return Pose(xyz, quat)


def parse_joint(d: dict, index: int = 0) -> JointSpec:
    if not isinstance(d, dict):
        raise ParseError(f"joint {index}: expected a mapping")
    try:
        lim = d["limits"]
        limits = JointLimits(
            float(lim["lower"]),
            float(lim["upper"]),
            float(lim.get("max_velocity", math.pi)),
            float(lim.get("max_acceleration", 10.0)),
            float(lim.get("max_jerk", 100.0)),
        )
        kind = d.get("kind", "revolute")
        if kind not in ("revolute", "prismatic"):
            raise ParseError(f"joint {index}: unknown kind {kind!r}")
        return JointSpec(
            name=str(d.get("name", f"j{index}")),
            kind=JointKind(kind),
            axis=_vec(d["axis"], 3, f"joint {index}.axis"),
            origin=_pose(d.get("origin"), f"joint {index}.origin"),
            limits=limits,
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"joint {index}: missing or malformed field ({exc})") from exc


def robot_from_dict(doc: dict) -> RobotModel:
    if not isinstance(doc, dict) or not isinstance(doc.get("robot"), dict):
        raise ParseError("document must contain a top-level 'robot' mapping")
    r = doc["robot"]
    joints_doc = r.get("joints")
    if not isinstance(joints_doc, list) or not joints_doc:
        raise ParseError("robot.joints must be a non-empty list")
    joints = [parse_joint(j, i) for i, j in enumerate(joints_doc)]
    spheres = []
    for i, s in enumerate(r.get("collision_spheres") or []):
        try:
            spheres.append(
                CollisionSphere(int(s["link"]), _vec(s["center"], 3, f"sphere {i}.center"), float(s["radius"]))
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"sphere {i}: missing or malformed field ({exc})") from exc
    ignore = []
    for pair in r.get("self_collision_ignore") or []:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ParseError(f"self_collision_ignore entry {pair!r} is not a pair")
        ignore.append((int(pair[0]), int(pair[1])))
    home = r.get("home_pose")
    return RobotModel(
        joints=tuple(joints),
        spheres=tuple(spheres),
        self_collision_ignore=frozenset(ignore),
        end_effector_link=int(r.get("end_effector_link", len(joints) - 1)),
        tool=_pose(r.get("tool"), "tool"),
        base=_pose(r.get("base"), "base"),
        name=str(r.get("name", "robot")),
        home_pose=_pose(home, "home_pose") if home is not None else None,
    )


def load_robot_model(text: str) -> RobotModel:
    """Parse and validate a YAML robot description."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed YAML: {exc}") from exc
    return robot_from_dict(doc)


def robot_to_dict(robot: RobotModel) -> dict:
    def limits(j: JointSpec) -> dict:
        lim = j.limits
        return {
            "lower": lim.lower,
            "upper": lim.upper,
            "max_velocity": lim.max_velocity,
            "max_acceleration": lim.max_acceleration,
            "max_jerk": lim.max_jerk,
        }

    out = {
        "name": robot.name,
        "end_effector_link": robot.end_effector_link,
        "joints": [
            {
                "name": j.name,
                "kind": j.kind.value,
                "axis": j.axis.tolist(),
                "origin": j.origin.to_dict(),
                "limits": limits(j),
            }
            for j in robot.joints
        ],
        "collision_spheres": [
            {"link": s.link_index, "center": s.center.tolist(), "radius": s.radius} for s in robot.spheres
        ],
        "self_collision_ignore": sorted([list(p) for p in robot.self_collision_ignore]),
        "tool": robot.tool.to_dict(),
        "base": robot.base.to_dict(),
    }
    if robot.home_pose is not None:
        out["home_pose"] = robot.home_pose.to_dict()
    return {"robot": out}
