"""Obstacle scenes with snapshot semantics and sphere distance queries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import yaml

from . import kernels
from .errors import DuplicateId, ParseError, UnknownId, ValidationError
from .transforms import Pose

INF = math.inf


class ShapeKind(str, Enum):
    CUBOID = "cuboid"
    SPHERE = "sphere"


@dataclass(frozen=True, eq=False)
class Obstacle:
    id: str
    shape: ShapeKind
    dims: tuple[float, ...]  # half extents (cuboid) or (radius,)
    pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        object.__setattr__(self, "shape", ShapeKind(self.shape))
        dims = tuple(float(d) for d in np.atleast_1d(self.dims))
        want = 3 if self.shape is ShapeKind.CUBOID else 1
        if len(dims) != want:
            raise ValidationError(f"obstacle {self.id!r}: {self.shape.value} needs {want} dimension(s)")
        if not all(d > 0 for d in dims):
            raise ValidationError(f"obstacle {self.id!r}: dimensions must be strictly positive")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def cuboid(cls, id: str, half_extents, pose: Pose | None = None) -> "Obstacle":
        return cls(id, ShapeKind.CUBOID, tuple(half_extents), pose or Pose())

    @classmethod
    def sphere(cls, id: str, radius: float, pose: Pose | None = None) -> "Obstacle":
        return cls(id, ShapeKind.SPHERE, (radius,), pose or Pose())

    def with_pose(self, pose: Pose) -> "Obstacle":
        return Obstacle(self.id, self.shape, self.dims, pose)

    def signed_distance(self, point) -> float:
        """Exact signed distance of a point to this primitive (interior: -min margin)."""
        clear, _, _ = kernels.world_clearance(
            np.asarray(point, dtype=float), 0.0, *_pack([self])
        )
        return float(clear[0])


def _pack(obstacles) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    m = len(obstacles)
    rot = np.zeros((m, 3, 3))
    pos = np.zeros((m, 3))
    kind = np.zeros(m, dtype=np.int32)
    dims = np.zeros((m, 3))
    for i, o in enumerate(obstacles):
        rot[i] = o.pose.rotation
        pos[i] = o.pose.position
        kind[i] = 0 if o.shape is ShapeKind.CUBOID else 1
        dims[i, : len(o.dims)] = o.dims
    return rot, pos, kind, dims


@dataclass(frozen=True, eq=False)
class WorldScene:
    """Immutable scene snapshot; every mutation returns a new, newer version."""

    obstacles: tuple[Obstacle, ...] = ()
    version: int = 0

    def __post_init__(self):
        obstacles = tuple(self.obstacles)
        ids = [o.id for o in obstacles]
        if len(set(ids)) != len(ids):
            raise DuplicateId(f"duplicate obstacle ids in {ids}")
        object.__setattr__(self, "obstacles", obstacles)
        packed = _pack(obstacles)
        for a in packed:
            a.setflags(write=False)
        object.__setattr__(self, "_packed", packed)

    @property
    def packed(self):
        """``(rotations, positions, kinds, dims)`` arrays for the kernels."""
        return self._packed

    @property
    def ids(self) -> list[str]:
        return [o.id for o in self.obstacles]

    def __len__(self) -> int:
        return len(self.obstacles)

    def __contains__(self, obstacle_id) -> bool:
        return any(o.id == obstacle_id for o in self.obstacles)

    def get(self, obstacle_id: str) -> Obstacle:
        for o in self.obstacles:
            if o.id == obstacle_id:
                return o
        raise UnknownId(obstacle_id)

    def without(self, *ids: str) -> "WorldScene":
        """Snapshot with the given obstacles hidden (same version; a view, not a mutation)."""
        return WorldScene(tuple(o for o in self.obstacles if o.id not in ids), self.version)

    def clearance(self, centers, radii):
        """Kernel call: per-sphere clearance, nearest index, normal."""
        return kernels.world_clearance(centers, radii, *self._packed)


def add_obstacle(scene: WorldScene, obs: Obstacle) -> WorldScene:
    if obs.id in scene:
        raise DuplicateId(obs.id)
    return WorldScene(scene.obstacles + (obs,), scene.version + 1)


def remove_obstacle(scene: WorldScene, obstacle_id: str) -> WorldScene:
    scene.get(obstacle_id)
    return WorldScene(tuple(o for o in scene.obstacles if o.id != obstacle_id), scene.version + 1)


def update_obstacle_pose(scene: WorldScene, obstacle_id: str, pose: Pose) -> WorldScene:
    scene.get(obstacle_id)
    obstacles = tuple(o.with_pose(pose) if o.id == obstacle_id else o for o in scene.obstacles)
    return WorldScene(obstacles, scene.version + 1)


def signed_distance_sphere(scene: WorldScene, center, radius: float) -> tuple[float, str | None]:
    """Minimum signed clearance of a sphere over all obstacles and the nearest id.

    Empty scenes return ``(inf, None)``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if len(scene) == 0:
        return INF, None
    clear, idx, _ = scene.clearance(np.asarray(center, dtype=float), float(radius))
    return float(clear[0]), scene.obstacles[int(idx[0])].id


def pack_link_spheres(segment_start, segment_end, radius: float, max_spacing: float) -> list[tuple[np.ndarray, float]]:
    """Place equal spheres uniformly along a segment, endpoints included.

    Count is ``ceil(length / max_spacing) + 1`` (one sphere for a degenerate segment).
    """
    if not radius > 0 or not max_spacing > 0:
        raise ValueError("radius and max_spacing must be positive")
    a = np.asarray(segment_start, dtype=float)
    b = np.asarray(segment_end, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return [(a.copy(), float(radius))]
    n = math.ceil(length / max_spacing) + 1
    return [(a + (b - a) * (k / (n - 1)), float(radius)) for k in range(n)]


# -- documents -----------------------------------------------------------------------

def scene_from_dict(doc) -> WorldScene:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("scene document must be a mapping")
    scene = WorldScene()
    for i, d in enumerate(doc.get("obstacles") or []):
        try:
            shape = d["shape"]
            pose = Pose.from_dict(d.get("pose"))
            if shape == "cuboid":
                obs = Obstacle.cuboid(str(d["id"]), d["half_extents"], pose)
            elif shape == "sphere":
                obs = Obstacle.sphere(str(d["id"]), float(d["radius"]), pose)
            else:
                raise ParseError(f"obstacle {i}: unknown shape {shape!r}")
        except (KeyError, TypeError) as exc:
            raise ParseError(f"obstacle {i}: missing or malformed field ({exc})") from exc
        scene = add_obstacle(scene, obs)
    return scene


def load_scene(text: str) -> WorldScene:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed YAML: {exc}") from exc
    return scene_from_dict(doc)


def scene_to_dict(scene: WorldScene) -> dict:
    out = []
    for o in scene.obstacles:
        d = {"id": o.id, "shape": o.shape.value, "pose": o.pose.to_dict()}
        if o.shape is ShapeKind.CUBOID:
            d["half_extents"] = list(o.dims)
        else:
            d["radius"] = o.dims[0]
        out.append(d)
    return {"obstacles": out}
