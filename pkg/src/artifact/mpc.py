"""Receding-horizon replanning against live scene snapshots."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import DEFAULT_SAFETY_MARGIN, batch_min_clearance
from .costs import CostWeights, goal_residual
from .model import RobotModel
from .sim import ObstacleScript, SimState, script_obstacle_motion, sim_step
from .solver.planner import PlanRequest, plan
from .trajectory import Trajectory
from .transforms import Pose
from .world import WorldScene


@dataclass(frozen=True)
class MpcOptions:
    horizon: int = 16
    replan_period: float = 0.1
    warm_start: bool = True
    weights: CostWeights = field(default_factory=CostWeights)
    rng_seed: int = 0
    num_seeds: int = 8
    dt: float = 0.01
    opt_dt: float = 0.2
    particle_iters: int = 10
    lbfgs_max_iters: int = 40
    safety_margin: float = DEFAULT_SAFETY_MARGIN
    threads: int = 1

    def __post_init__(self):
        if self.horizon < 4:
            raise ValueError("horizon must be >= 4 knots")
        if not self.replan_period > 0:
            raise ValueError("replan_period must be positive")


@dataclass(frozen=True, eq=False)
class MpcState:
    config: np.ndarray
    goal: Pose
    horizon: Trajectory | None = None
    horizon_t0: float = 0.0  # time at which the horizon's first knot applies
    horizon_goal: Pose | None = None  # goal the stored horizon was planned for
    scene_version: int = -1
    replan_count: int = 0
    last_replan: float = -np.inf
    plan_failed: bool = False
    failure_reason: str | None = None
    ik_cache: tuple = ()

    def with_goal(self, goal: Pose) -> "MpcState":
        return replace(self, goal=goal)


def _shifted(horizon: Trajectory, elapsed: float, start: np.ndarray) -> np.ndarray:
    """Previous horizon advanced by the elapsed knots, padded with its last knot."""
    k = horizon.knots
    e = int(min(round(elapsed / horizon.dt), len(k) - 1))
    out = np.concatenate([k[e:], np.repeat(k[-1:], e, axis=0)], axis=0)
    out[0] = start
    return out


def _hold(config) -> Trajectory:
    return Trajectory(1.0, np.stack([config, config]))


def mpc_step(
    robot: RobotModel, state: MpcState, scene: WorldScene, now: float, opts: MpcOptions = MpcOptions()
) -> tuple[np.ndarray, MpcState, float]:
    """One control tick. Returns ``(command for now + replan_period, new state, replan latency)``.

    Replans when the scene version or goal changed or the period elapsed; otherwise
    follows the stored horizon. A failed replan holds the current configuration
    and sets ``plan_failed`` on the returned state.
    """
    if scene.version < state.scene_version:
        raise ValueError("scene snapshot is older than the last one seen")
    q = robot.check_config(state.config)
    goal_changed = state.horizon_goal is None or not state.horizon_goal.allclose(state.goal, atol=0.0)
    due = now - state.last_replan >= opts.replan_period - 1e-12
    latency = 0.0
    if state.horizon is None or goal_changed or scene.version != state.scene_version or due:
        warm = None
        if opts.warm_start and state.horizon is not None and not state.plan_failed and state.horizon.n_knots == opts.horizon:
            warm = [_shifted(state.horizon, now - state.horizon_t0, q)]
        req = PlanRequest(
            start=q,
            goal=state.goal,
            weights=opts.weights,
            num_seeds=opts.num_seeds,
            timesteps=opts.horizon,
            dt=opts.dt,
            rng_seed=opts.rng_seed + state.replan_count,
            opt_dt=opts.opt_dt,
            particle_iters=opts.particle_iters,
            lbfgs_max_iters=opts.lbfgs_max_iters,
            safety_margin=opts.safety_margin,
            threads=opts.threads,
            warm_start=warm,
            ik_solutions=list(state.ik_cache) if (state.ik_cache and not goal_changed) else None,
        )
        t0 = time.perf_counter()
        res = plan(robot, scene, req)
        latency = time.perf_counter() - t0
        common = dict(
            horizon_t0=now,
            horizon_goal=state.goal,
            scene_version=scene.version,
            replan_count=state.replan_count + 1,
            last_replan=now,
        )
        if res.success:
            state = replace(
                state, horizon=res.trajectory, plan_failed=False, failure_reason=None,
                ik_cache=tuple(res.ik_solutions), **common,
            )
        else:
            reason = res.failure_reason.value if res.failure_reason else "PlanFailed"
            cache = tuple(res.ik_solutions) if res.ik_solutions else ()
            state = replace(state, horizon=_hold(q), plan_failed=True, failure_reason=reason, ik_cache=cache, **common)
    cmd = robot.clamp(state.horizon.at(now + opts.replan_period - state.horizon_t0))
    return cmd, state, latency


# -- episode harness -------------------------------------------------------------------

@dataclass
class EpisodeLog:
    times: np.ndarray  # (K,) sim times of executed configs
    configs: np.ndarray  # (K, D)
    clearance: np.ndarray  # (K,) min clearance at each executed config against the live scene
    latencies: list
    plan_failures: int
    replans: int
    collision_free: bool  # every executed segment clear against the scenes before and after it
    final_goal_error: tuple
    goal_errors_around_change: list = field(default_factory=list)


def run_episode(
    robot: RobotModel,
    scene: WorldScene,
    start,
    goal: Pose,
    duration: float,
    scripts=(),
    opts: MpcOptions = MpcOptions(),
    sim_dt: float = 0.01,
    goal_changes=(),
    oversample: int = 16,
    margin: float = 0.0,
) -> EpisodeLog:
    """Run MPC in closed loop with the kinematic simulator.

    The controller ticks every ``replan_period``; between ticks the simulator
    follows the active horizon at ``sim_dt``. Each executed segment is checked at
    ``oversample`` points against the scene snapshots at both of its ends.
    """
    sim = SimState(robot, 0.0, start, scene)
    for s in scripts:
        if isinstance(s, ObstacleScript):
            sim = script_obstacle_motion(sim, s.obstacle_id, s.velocity, s.t_start, s.t_end)
        else:
            sim = script_obstacle_motion(sim, *s)
    state = MpcState(np.asarray(start, dtype=float), goal)
    changes = sorted(goal_changes, key=lambda c: c[0])
    n_ticks = int(round(duration / opts.replan_period))
    sub = max(int(round(opts.replan_period / sim_dt)), 1)
    times, configs, clears = [0.0], [sim.config.copy()], [float(batch_min_clearance(robot, sim.scene, sim.config[None])[0])]
    latencies, failures, ok = [], 0, True
    change_errs = []
    frac = np.arange(1, oversample + 1) / oversample
    for tick in range(n_ticks):
        now = tick * opts.replan_period
        pending = [c for c in changes if c[0] <= now + 1e-12]
        if pending:
            changes = changes[len(pending):]
            before = None
            if state.horizon is not None:
                before = goal_residual(robot, state.horizon.end, pending[-1][1])
            state = state.with_goal(pending[-1][1])
        state = replace(state, config=sim.config)
        cmd, state, lat = mpc_step(robot, state, sim.scene, now, opts)
        if pending:
            after = goal_residual(robot, state.horizon.end, state.goal)
            change_errs.append((before, after))
        latencies.append(lat)
        failures += int(state.plan_failed)
        for k in range(sub):
            t_next = now + (k + 1) * sim_dt
            target = robot.clamp(state.horizon.at(t_next - state.horizon_t0))
            prev_q, prev_scene = sim.config, sim.scene
            sim = sim_step(sim, target, sim_dt)
            seg = prev_q[None] * (1 - frac[:, None]) + sim.config[None] * frac[:, None]
            seg = np.concatenate([prev_q[None], seg])
            c = min(
                batch_min_clearance(robot, prev_scene, seg).min(),
                batch_min_clearance(robot, sim.scene, seg).min(),
            )
            ok &= bool(c >= margin)
            times.append(sim.time)
            configs.append(sim.config.copy())
            clears.append(float(c))
    pe, re = goal_residual(robot, sim.config, state.goal)
    return EpisodeLog(
        np.array(times), np.array(configs), np.array(clears), latencies, failures, state.replan_count, ok,
        (float(pe), float(re)), change_errs,
    )
