import threading

import numpy as np
import pytest

from artifact.collision import batch_min_clearance, dense_validate
from artifact.costs import goal_residual
from artifact.model import end_effector_pose
from artifact.scenarios import HOME, planar_2r, random_problem
from artifact.solver import FailureReason, PlanRequest, plan
from artifact.solver.planner import wrap_toward
from artifact.transforms import Pose
from artifact.world import Obstacle, WorldScene, add_obstacle


def detour_problem():
    robot = planar_2r()
    scene = add_obstacle(WorldScene(), Obstacle.cuboid("block", (0.08, 0.08, 0.3), Pose((1.9, 0.3, 0.0))))
    start, goal_q = np.array([-0.6, 0.3]), np.array([0.6, 0.3])
    return robot, scene, start, end_effector_pose(robot, goal_q), goal_q


def assert_sound(robot, scene, req, res, oversample=8):
    assert res.success and res.failure_reason is None
    assert dense_validate(robot, scene, res.trajectory, req.safety_margin, oversample)
    pos, rot = goal_residual(robot, res.trajectory.end, req.goal)
    assert pos < req.position_tol and rot < req.rotation_tol
    assert np.all(robot.within_limits(res.trajectory.knots))
    assert np.array_equal(res.trajectory.start, req.start)


def test_null_plan(ur5e, workcell):
    goal = end_effector_pose(ur5e, HOME)
    req = PlanRequest(HOME, goal, num_seeds=8)
    res = plan(ur5e, workcell, req)
    assert_sound(ur5e, workcell, req, res)
    w = req.weights
    assert res.final_cost < w.w_pos * req.position_tol**2 + w.w_rot * req.rotation_tol**2
    assert np.abs(res.trajectory.knots - HOME).max() < 1e-3


def test_planar_detour():
    robot, scene, start, goal, goal_q = detour_problem()
    # the straight joint-space line runs through the block
    assert batch_min_clearance(robot, scene, np.linspace(start, goal_q, 64)).min() < 0
    req = PlanRequest(start, goal, rng_seed=0)
    res = plan(robot, scene, req)
    assert_sound(robot, scene, req, res)
    assert dense_validate(robot, scene, res.trajectory, 0.0, 32)
    mid = res.trajectory.knots[len(res.trajectory.knots) // 2]
    assert np.abs(mid - 0.5 * (start + goal_q)).max() > 0.1


def test_unreachable_goal_reports_ik_failed():
    robot = planar_2r()
    res = plan(robot, WorldScene(), PlanRequest([0.1, 0.2], Pose((3.0, 0.0, 0.0)), num_seeds=4))
    assert not res.success and res.failure_reason is FailureReason.IK_FAILED
    assert res.trajectory is None


def test_goal_inside_obstacle_fails():
    robot = planar_2r()
    goal = end_effector_pose(robot, [0.5, 0.5])
    scene = add_obstacle(WorldScene(), Obstacle.cuboid("b", (0.2, 0.2, 0.2), Pose(goal.position)))
    res = plan(robot, scene, PlanRequest([-1.0, 0.3], goal, num_seeds=4))
    assert not res.success
    assert res.failure_reason in (FailureReason.IK_FAILED, FailureReason.COLLISION_RESIDUAL)


def test_request_validation():
    with pytest.raises(ValueError):
        PlanRequest([0.0], Pose(), num_seeds=0)
    with pytest.raises(ValueError):
        PlanRequest([0.0], Pose(), timesteps=3)
    with pytest.raises(ValueError):
        PlanRequest([0.0], Pose(), dt=0.0)


def test_stage_monotonicity_and_accounting():
    p = random_problem(np.random.default_rng(8), 4, 3)
    req = PlanRequest(p.start, p.goal, num_seeds=8, rng_seed=2)
    res = plan(p.robot, p.scene, req)
    st = res.stage_stats
    assert st["particle"]["best_cost"] <= st["seed"]["best_cost"]
    assert st["lbfgs"]["best_cost"] <= st["particle"]["best_cost"]
    assert np.all(np.diff(st["particle"]["history"]) <= 0)
    n = st["seed"]["candidates"]
    total = st["cost_evaluations"]
    assert total == st["particle"]["evaluations"] + st["lbfgs"]["evaluations"] + n
    per_candidate = 1 + req.particle_iters * req.particle_pop + (req.lbfgs_max_iters + req.polish_iters) * (1 + 30)
    assert total <= n * per_candidate


def test_thread_count_does_not_change_result():
    p = random_problem(np.random.default_rng(9), 3, 2)
    outs = set()
    for threads in (1, 3):
        res = plan(p.robot, p.scene, PlanRequest(p.start, p.goal, num_seeds=12, threads=threads))
        outs.add(res.trajectory.knots.tobytes() + np.float64(res.trajectory.dt).tobytes())
    assert len(outs) == 1


def test_concurrent_plans_are_independent():
    probs = [random_problem(np.random.default_rng(s), 3, 2) for s in (20, 21)]
    reqs = [PlanRequest(p.start, p.goal, num_seeds=8) for p in probs]
    serial = [plan(p.robot, p.scene, r).trajectory.knots for p, r in zip(probs, reqs)]
    out = [None, None]

    def run(i):
        out[i] = plan(probs[i].robot, probs[i].scene, reqs[i]).trajectory.knots

    threads = [threading.Thread(target=run, args=(i,)) for i in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(np.array_equal(a, b) for a, b in zip(serial, out))


def test_wrap_toward(ur5e):
    q = np.array([6.0, 0.0, 0.0, 0.0, -6.0, 0.0])
    w = wrap_toward(ur5e, q, np.zeros(6))
    assert np.allclose(w, [6.0 - 2 * np.pi, 0, 0, 0, 2 * np.pi - 6.0, 0])
    assert np.allclose(end_effector_pose(ur5e, w).position, end_effector_pose(ur5e, q).position)
