import math

import numpy as np
from artifact.model import CollisionSphere, JointLimits, JointSpec, RobotModel
from artifact.transforms import Pose


def random_pose(rng, spread=0.3):
    return Pose.from_xyz_rotvec(rng.uniform(-spread, spread, 3), rng.normal(size=3))


def random_chain(rng, dof, prismatic_first=False, n_per_link=2):
    """Chain with random unit axes and origins; for oracle and gradient checks."""
    joints = []
    for i in range(dof):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        kind = "prismatic" if (prismatic_first and i == 0) else "revolute"
        joints.append(JointSpec(f"j{i}", kind, axis, random_pose(rng, 0.2), JointLimits(-3.0, 3.0)))
    spheres = [
        CollisionSphere(link, rng.uniform(-0.1, 0.1, 3), float(rng.uniform(0.03, 0.08)))
        for link in range(dof)
        for _ in range(n_per_link)
    ]
    return RobotModel(tuple(joints), tuple(spheres), tool=Pose.from_xyz_rotvec([0.1, 0.0, 0.0], [0.0, 0.3, 0.0]))


def central_fd(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-8))


# -- gradient-check instances shared by unit and acceptance tests ---------------------

def goal_instance(rng):
    from artifact.costs import CostWeights, goal_cost, goal_residual
    from artifact.trajectory import Trajectory

    robot = random_chain(rng, 6)
    T = int(rng.integers(4, 9))
    while True:
        knots = rng.uniform(-2, 2, (T, 6))
        goal = random_pose(rng, 0.5)
        # keep away from the rotation-vector branch cut at pi
        if goal_residual(robot, knots[-1], goal)[1] < 2.8:
            break
    w = CostWeights(w_pos=float(rng.uniform(1, 2e4)), w_rot=float(rng.uniform(1, 2e4)))
    return lambda k: goal_cost(robot, Trajectory(0.1, k), goal, w), knots


def smooth_instance(rng):
    from artifact.costs import CostWeights, smooth_cost
    from artifact.model import JointLimits
    from artifact.trajectory import Trajectory

    D = int(rng.integers(1, 7))
    T = int(rng.integers(4, 12))
    dt = float(rng.uniform(0.05, 0.3))
    knots = rng.uniform(-1.5, 1.5, (T, D))
    limits = [JointLimits(-1.0, 1.0, float(rng.uniform(1, 5)), float(rng.uniform(5, 30)), float(rng.uniform(30, 300)))] * D
    w = CostWeights(w_v=float(rng.uniform(0, 3)), w_a=float(rng.uniform(0, 3)), w_j=float(rng.uniform(0, 3)),
                    w_limit=float(rng.uniform(0, 1e3)))
    return lambda k: smooth_cost(Trajectory(dt, k), w, limits), knots


def collision_instance(rng):
    """Planar 2-joint arm near one cuboid, with every sphere centre kept outside the box
    so no nearest-feature switch of the interior distance is crossed."""
    from artifact.costs import CostWeights, collision_cost
    from artifact.scenarios import random_arm
    from artifact.trajectory import Trajectory
    from artifact.world import Obstacle, WorldScene, add_obstacle

    robot = random_arm(rng, 2)
    w = CostWeights(activation_margin=0.25)
    while True:
        c = np.r_[rng.uniform(-0.7, 0.7, 2), 0.0]
        obs = Obstacle.cuboid("box", rng.uniform(0.05, 0.15, 3), Pose(c, (np.cos(0.3), 0, 0, np.sin(0.3))))
        scene = add_obstacle(WorldScene(), obs)
        T = int(rng.integers(4, 8))
        knots = rng.uniform(-3, 3, (T, 2))
        centers = robot.sphere_centers(robot.kinematics(knots)).reshape(-1, 3)
        depth = np.array([obs.signed_distance(p) for p in centers])
        clear = depth - np.tile(robot.sphere_radius, T)
        if depth.min() > 1e-3 and np.any(clear < w.activation_margin):
            break
    return lambda k: collision_cost(robot, scene, Trajectory(0.1, k), w), knots


def hold_instance(rng):
    from artifact.costs import CostWeights, hold_orientation_cost
    from artifact.trajectory import Trajectory

    robot = random_chain(rng, 6)
    T = int(rng.integers(4, 9))
    ref = random_pose(rng, 0.5)
    while True:
        knots = rng.uniform(-1, 1, (T, 6))
        kin = robot.kinematics(knots)
        from artifact.transforms import so3_log

        err = np.linalg.norm(so3_log(ref.rotation.T @ kin.ee_rot), axis=-1)
        if err.max() < 2.8:
            break
    w = CostWeights(w_hold=float(rng.uniform(1, 3000)), hold_vec_weight=tuple(rng.uniform(0, 2, 6)))
    return lambda k: hold_orientation_cost(robot, Trajectory(0.1, k), ref, w), knots


GRADIENT_CASES = {
    "goal": (goal_instance, 1e-5),
    "smooth": (smooth_instance, 1e-5),
    "collision": (collision_instance, 1e-4),
    "hold": (hold_instance, 1e-5),
}


def gradient_error(make, rng):
    f, knots = make(rng)
    ev = f(knots)
    fd = central_fd(lambda k: f(k).value, knots)
    return rel_err(ev.gradient, fd), ev
