import numpy as np
import pytest

from artifact.model import end_effector_pose
from artifact.mpc import MpcOptions, MpcState, _shifted, mpc_step, run_episode
from artifact.scenarios import BIN_A_ABOVE, BIN_B_ABOVE, HOME, config_for
from artifact.solver.planner import PlanRequest, plan
from artifact.transforms import Pose

OPTS = MpcOptions()


def test_fixed_point_at_goal(ur5e, workcell):
    state = MpcState(HOME.copy(), end_effector_pose(ur5e, HOME))
    q = HOME.copy()
    for tick in range(3):
        cmd, state, _ = mpc_step(ur5e, state.__class__(**{**state.__dict__, "config": q}), workcell, tick * OPTS.replan_period, OPTS)
        assert not state.plan_failed
        assert np.abs(cmd - HOME).max() < 1e-3
        q = cmd


def test_unreachable_goal_holds_position(ur5e, workcell):
    state = MpcState(HOME.copy(), Pose((3.0, 0.0, 0.5)))
    cmd, state, _ = mpc_step(ur5e, state, workcell, 0.0, OPTS)
    assert state.plan_failed and state.failure_reason is not None
    assert np.array_equal(cmd, HOME)


def test_commands_continuous_and_within_limits(ur5e, workcell):
    q = config_for(ur5e, workcell, BIN_A_ABOVE)
    state = MpcState(q, BIN_B_ABOVE)
    prev = q
    for tick in range(6):
        state = MpcState(**{**state.__dict__, "config": prev})
        cmd, state, _ = mpc_step(ur5e, state, workcell, tick * OPTS.replan_period, OPTS)
        assert np.all(cmd >= ur5e.lower) and np.all(cmd <= ur5e.upper)
        # with perfect tracking each command is reachable within one period
        assert np.all(np.abs(cmd - prev) <= ur5e.max_velocity * OPTS.replan_period + 1e-9)
        prev = cmd


def test_warm_start_never_worse_than_cold(ur5e, workcell):
    q = config_for(ur5e, workcell, BIN_A_ABOVE)
    state = MpcState(q, BIN_B_ABOVE)
    cmd, state, _ = mpc_step(ur5e, state, workcell, 0.0, OPTS)
    now = OPTS.replan_period
    base = dict(
        start=cmd, goal=BIN_B_ABOVE, num_seeds=OPTS.num_seeds, timesteps=OPTS.horizon, dt=OPTS.dt,
        rng_seed=7, opt_dt=OPTS.opt_dt, particle_iters=OPTS.particle_iters, lbfgs_max_iters=OPTS.lbfgs_max_iters,
    )
    cold = plan(ur5e, workcell, PlanRequest(**base))
    warm = plan(ur5e, workcell, PlanRequest(**base, warm_start=[_shifted(state.horizon, now, cmd)]))
    assert warm.stage_stats["seed"]["best_cost"] <= cold.stage_stats["seed"]["best_cost"]
    assert warm.stage_stats["seed"]["candidates"] == cold.stage_stats["seed"]["candidates"] + 1


def test_goal_change_is_tracked(ur5e, workcell):
    q = config_for(ur5e, workcell, BIN_A_ABOVE)
    log = run_episode(ur5e, workcell, q, BIN_A_ABOVE, 1.5, goal_changes=[(0.5, BIN_B_ABOVE)])
    assert log.collision_free and log.plan_failures == 0
    (before, after), = log.goal_errors_around_change
    assert after[0] < before[0]
    assert log.final_goal_error[0] < 0.05


def test_older_scene_rejected(ur5e, workcell):
    from artifact.world import Obstacle, add_obstacle

    newer = add_obstacle(workcell, Obstacle.sphere("ball", 0.02, Pose((2.0, 2.0, 2.0))))
    _, state, _ = mpc_step(ur5e, MpcState(HOME.copy(), end_effector_pose(ur5e, HOME)), newer, 0.0, OPTS)
    with pytest.raises(ValueError):
        mpc_step(ur5e, state, workcell, 0.1, OPTS)
