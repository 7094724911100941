"""Kinematic execution: joint stepping, scripted obstacle motion, grasp attachment."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, OverlappingScript, UnknownId
from .model import RobotModel, end_effector_pose, load_robot_model
from .transforms import Pose
from .world import WorldScene, load_scene, update_obstacle_pose

ATTACH_DISTANCE = 0.01  # m between the end effector and the declared grasp pose


@dataclass(frozen=True)
class ObstacleScript:
    obstacle_id: str
    velocity: tuple[float, float, float]
    t_start: float
    t_end: float

    def overlaps(self, other: "ObstacleScript") -> bool:
        return self.obstacle_id == other.obstacle_id and self.t_start < other.t_end and other.t_start < self.t_end

    def displacement(self, t0: float, t1: float) -> np.ndarray:
        """Translation accumulated over ``[t0, t1]``."""
        overlap = max(0.0, min(t1, self.t_end) - max(t0, self.t_start))
        return np.asarray(self.velocity, dtype=float) * overlap


@dataclass(frozen=True, eq=False)
class SimState:
    robot: RobotModel
    time: float
    config: np.ndarray
    scene: WorldScene
    attached: tuple[str, Pose] | None = None  # (obstacle id, grasp transform ee -> object)
    scripts: tuple[ObstacleScript, ...] = field(default=())

    def __post_init__(self):
        q = self.robot.check_config(self.config).copy()
        q.setflags(write=False)
        object.__setattr__(self, "config", q)

    def ee_pose(self) -> Pose:
        return end_effector_pose(self.robot, self.config)


def sim_step(state: SimState, command, dt: float) -> SimState:
    """Advance by ``dt``: move toward ``command`` at no more than max_velocity per joint."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    robot = state.robot
    cmd = robot.check_config(command)
    step = np.clip(cmd - state.config, -robot.max_velocity * dt, robot.max_velocity * dt)
    q = state.config + step
    t0, t1 = state.time, state.time + dt
    scene = state.scene
    for s in state.scripts:
        d = s.displacement(t0, t1)
        if np.any(d != 0.0) and (state.attached is None or state.attached[0] != s.obstacle_id):
            obs = scene.get(s.obstacle_id)
            scene = update_obstacle_pose(scene, s.obstacle_id, obs.pose.translated(d))
    if state.attached is not None and np.any(step != 0.0):
        oid, grasp = state.attached
        scene = update_obstacle_pose(scene, oid, end_effector_pose(robot, q) @ grasp)
    return replace(state, time=t1, config=q, scene=scene)


def script_obstacle_motion(state: SimState, obstacle_id: str, velocity, t_start: float, t_end: float) -> SimState:
    """Register a constant-velocity translation of ``obstacle_id`` during ``[t_start, t_end]``."""
    if obstacle_id not in state.scene:
        raise UnknownId(obstacle_id)
    if not t_start < t_end:
        raise ValueError("script window needs t_start < t_end")
    v = tuple(float(x) for x in np.asarray(velocity, dtype=float).reshape(3))
    script = ObstacleScript(obstacle_id, v, float(t_start), float(t_end))
    for other in state.scripts:
        if script.overlaps(other):
            raise OverlappingScript(f"{obstacle_id}: [{t_start}, {t_end}] overlaps [{other.t_start}, {other.t_end}]")
    return replace(state, scripts=state.scripts + (script,))


def try_attach(state: SimState, obstacle_id: str, grasp_pose: Pose, tol: float = ATTACH_DISTANCE) -> tuple[SimState, bool]:
    """Attach ``obstacle_id`` rigidly to the end effector if it is within ``tol`` of ``grasp_pose``."""
    ee = state.ee_pose()
    if np.linalg.norm(ee.position - grasp_pose.position) > tol:
        return state, False
    grasp = ee.inverse() @ state.scene.get(obstacle_id).pose
    return replace(state, attached=(obstacle_id, grasp)), True


def detach(state: SimState) -> SimState:
    return replace(state, attached=None)


# -- episode documents -----------------------------------------------------------------

@dataclass
class Episode:
    robot: RobotModel
    scene: WorldScene
    start: np.ndarray
    goal: Pose
    duration: float
    scripts: list[ObstacleScript]
    goal_changes: list[tuple[float, Pose]] = field(default_factory=list)
    task: str | None = None


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_episode(path) -> Episode:
    """Episode YAML: robot/scene files (relative to the document), start, goal, scripts."""
    path = Path(path)
    try:
        doc = yaml.safe_load(_read(path))
        ep = doc["episode"]
        root = path.parent
        robot = load_robot_model(_read(root / ep["robot"]))
        scene = load_scene(_read(root / ep["scene"]))
        scripts = [
            ObstacleScript(str(s["id"]), tuple(float(v) for v in s["velocity"]), float(s["t_start"]), float(s["t_end"]))
            for s in ep.get("scripts") or []
        ]
        changes = [(float(g["t"]), Pose.from_dict(g["goal"])) for g in ep.get("goal_changes") or []]
        return Episode(
            robot,
            scene,
            np.asarray(ep["start"], dtype=float),
            Pose.from_dict(ep["goal"]),
            float(ep.get("duration", 3.0)),
            scripts,
            changes,
            ep.get("task"),
        )
    except (KeyError, TypeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: malformed episode ({exc})") from exc
