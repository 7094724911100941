"""Procedural robots and planning problems used by tests, benchmarks and the CLI."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collision import batch_min_clearance
from .model import CollisionSphere, JointLimits, JointSpec, RobotModel, end_effector_pose
from .transforms import Pose
from .world import Obstacle, WorldScene, add_obstacle, pack_link_spheres

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def serial_arm(
    lengths,
    axes,
    radius: float = 0.04,
    spacing: float = 0.06,
    base_height: float = 0.0,
    limit: float = math.pi,
    name: str = "arm",
) -> RobotModel:
    """Chain whose links extend along their local x axis with spheres packed on each link.

    ``axes`` holds one of "x", "y", "z" per joint. The tool sits at the tip of the
    last link.
    """
    lengths = [float(v) for v in lengths]
    if len(lengths) != len(axes):
        raise ValueError("need one length per joint")
    joints = []
    spheres = []
    for i, (L, ax) in enumerate(zip(lengths, axes)):
        offset = (0.0, 0.0, base_height) if i == 0 else (lengths[i - 1], 0.0, 0.0)
        joints.append(
            JointSpec(f"j{i}", "revolute", _AXES[ax], Pose(offset), JointLimits(-limit, limit))
        )
        # skip the sphere at the joint itself on all but the first link so adjacent
        # links do not stack two spheres on the same point
        packed = pack_link_spheres((0, 0, 0), (L, 0, 0), radius, spacing)
        for c, r in packed[(0 if i == 0 else 1):]:
            spheres.append(CollisionSphere(i, c, r))
    return RobotModel(tuple(joints), tuple(spheres), tool=Pose((lengths[-1], 0.0, 0.0)), name=name)


def planar_2r(l1: float = 1.0, l2: float = 1.0, radius: float = 0.05) -> RobotModel:
    """Two revolute joints about z; FK of (pi/2, -pi/2) is (l2, l1, 0)."""
    return serial_arm([l1, l2], ["z", "z"], radius=radius, spacing=1.5 * radius, name="planar_2r")


_PATTERN = ["z", "y", "y", "x", "y", "x", "y"]


def random_arm(rng: np.random.Generator, dof: int) -> RobotModel:
    """Random 2-7 joint arm; two joints give a planar arm."""
    if dof == 2:
        lengths = rng.uniform(0.35, 0.5, 2)
        return serial_arm(lengths, ["z", "z"], radius=0.04, name="random_2")
    lengths = rng.uniform(0.12, 0.3, dof)
    lengths[0] = 0.05
    return serial_arm(lengths, _PATTERN[:dof], radius=0.035, spacing=0.05, base_height=0.15, name=f"random_{dof}")


@dataclass
class Problem:
    robot: RobotModel
    scene: WorldScene
    start: np.ndarray
    goal: Pose
    goal_config: np.ndarray
    witness: np.ndarray  # a collision-free knot sequence proving feasibility


def _witness_path(start, goal, via, T: int = 257) -> np.ndarray:
    t = np.linspace(0.0, 1.0, T)[:, None]
    mid = 0.5 * (start + goal)
    return start + t * (goal - start) + np.sin(np.pi * t) * (via - mid)


def random_problem(
    rng: np.random.Generator, dof: int, n_obstacles: int, clearance: float = 0.06, max_tries: int = 500
) -> Problem:
    """Planning problem that is feasible by construction.

    A start, goal and via configuration define a smooth witness path that is
    collision-free with ``clearance``. Cuboids are then dropped near the straight
    joint-space line (so they tend to block it) and rejected whenever they come
    within ``clearance`` of the witness path.
    """
    robot = random_arm(rng, dof)
    lim = 0.8 * robot.upper
    for _ in range(max_tries):
        start = rng.uniform(-lim, lim)
        goal_q = rng.uniform(-lim, lim)
        via = 0.5 * (start + goal_q) + rng.uniform(-0.6, 0.6, dof)
        path = np.clip(_witness_path(start, goal_q, via), robot.lower, robot.upper)
        if batch_min_clearance(robot, WorldScene(), path).min() >= clearance:
            break
    else:
        raise RuntimeError("could not sample a self-collision-free witness path")
    line = np.linspace(start, goal_q, 33)
    line_pts = robot.sphere_centers(robot.kinematics(line)).reshape(-1, 3)
    planar = dof == 2
    scene = WorldScene()
    placed = 0
    for _ in range(max_tries * 4):
        if placed == n_obstacles:
            break
        c = line_pts[rng.integers(len(line_pts))] + rng.normal(0.0, 0.08, 3)
        half = rng.uniform(0.03, 0.12, 3)
        if planar:
            c[2] = 0.0
            half[2] = 0.3
        obs = Obstacle.cuboid(f"box{placed}", half, Pose(c))
        trial = add_obstacle(scene, obs)
        if batch_min_clearance(robot, trial, path).min() >= clearance:
            scene = trial
            placed += 1
    return Problem(robot, scene, start, end_effector_pose(robot, goal_q), goal_q, path)


# -- scripted UR5e-like workcell tasks -------------------------------------------------

TOP_DOWN = (0.0, 1.0, 0.0, 0.0)  # tool z axis pointing at the table
HOME = np.array([0.0, -1.2, 1.5, -1.87, -1.57, 0.0])
BIN_A_ABOVE = Pose((0.45, -0.35, 0.25), TOP_DOWN)
BIN_B_ABOVE = Pose((0.45, 0.35, 0.25), TOP_DOWN)


def config_for(robot: RobotModel, scene: WorldScene, pose: Pose, near=HOME) -> np.ndarray:
    """Collision-free IK solution for ``pose`` closest in joint space to ``near``."""
    from .solver.ik import ik_solve
    from .solver.planner import wrap_toward

    sols = [wrap_toward(robot, q, near) for q in ik_solve(robot, scene, pose, seed_configs=[near])]
    return min(sols, key=lambda q: float(np.abs(q - near).sum()))


def mpc_demo_episode(robot: RobotModel, scene: WorldScene, speed: float = 0.1, duration: float = 5.0):
    """Shuttle between the two bins while a box descends through the path at ``speed`` m/s.

    The box starts 0.6 m above the table centre line and travels 0.4 m down.
    """
    from .sim import Episode, ObstacleScript

    scene = add_obstacle(scene, Obstacle.cuboid("intruder", (0.06, 0.06, 0.06), Pose((0.56, 0.0, 0.6))))
    start = config_for(robot, scene, BIN_A_ABOVE)
    changes = [(float(t), BIN_A_ABOVE if t % 2 else BIN_B_ABOVE) for t in range(1, int(duration))]
    script = ObstacleScript("intruder", (0.0, 0.0, -float(speed)), 0.0, 0.4 / float(speed))
    return Episode(robot, scene, start, BIN_B_ABOVE, duration, [script], changes)


def gantry_arm(base: RobotModel, travel=(-0.5, 0.5)) -> RobotModel:
    """``base`` on a prismatic x rail (the rail carriage carries one sphere)."""
    from .model import compose_gantry_chain

    rail = JointSpec("gantry_x", "prismatic", (1.0, 0.0, 0.0), Pose(), JointLimits(travel[0], travel[1], 1.0, 5.0, 50.0))
    carriage = [CollisionSphere(0, (0.0, 0.0, -0.05), 0.06)]
    return compose_gantry_chain(base, rail, carriage)


def hold_orientation_task(robot: RobotModel, scene: WorldScene):
    """Bin-to-bin move over a wall; without the hold cost the tool tilts on the way over.

    Returns ``(scene, start, goal, reference)``.
    """
    scene = add_obstacle(scene, Obstacle.cuboid("wall", (0.2, 0.03, 0.22), Pose((0.5, 0.0, 0.2))))
    start = config_for(robot, scene, BIN_A_ABOVE)
    return scene, start, BIN_B_ABOVE, Pose((0.0, 0.0, 0.0), TOP_DOWN)
