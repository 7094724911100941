"""Three-stage planner: IK seeds -> particle refinement -> parallel L-BFGS -> retime."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..collision import DEFAULT_SAFETY_MARGIN, batch_min_clearance, dense_validate, sweep_check
from ..costs import CostWeights, TrajectoryCost, goal_residual
from ..errors import Unreachable
from ..model import RobotModel
from ..trajectory import Trajectory
from ..transforms import Pose
from ..world import WorldScene
from .ik import ik_solve, project_to_goal
from .lbfgs import LbfgsOptions, lbfgs_refine_batch, smoothness_preconditioner
from .particle import particle_refine_batch
from .retime import retime
from .seeds import seed_trajectories, via_point_seeds

CHUNK = 8  # candidates per worker task; fixed so grouping never depends on thread count


class FailureReason(str, Enum):
    IK_FAILED = "IKFailed"
    COLLISION_RESIDUAL = "CollisionResidual"
    GOAL_TOLERANCE = "GoalTolerance"


@dataclass
class PlanRequest:
    start: np.ndarray
    goal: Pose
    weights: CostWeights = field(default_factory=CostWeights)
    num_seeds: int = 32
    timesteps: int = 64
    dt: float = 0.01
    hold_orientation: Pose | None = None
    rng_seed: int = 0
    rotation_tol: float = 1e-2
    position_tol: float = 1e-3
    # optimization time step: smoothness terms are evaluated on this grid, the
    # emitted trajectory starts from ``dt`` and is stretched by retiming
    opt_dt: float = 0.1
    collision_substeps: int = 4
    particle_iters: int = 20
    particle_pop: int = 4
    particle_sigma: float = 0.4
    # share of candidates seeded through a random via point instead of a straight line
    via_fraction: float = 0.5
    via_spread: float = 1.5
    lbfgs_memory: int = 10
    lbfgs_max_iters: int = 60
    # second pass with the terminal knot projected onto the goal and held fixed
    polish_iters: int = 30
    grad_tol: float = 1e-6
    safety_margin: float = DEFAULT_SAFETY_MARGIN
    threads: int = 1
    max_ik_goals: int = 4
    warm_start: list | None = None  # extra candidates (Trajectories or knot arrays) placed first
    ik_solutions: list | None = None  # reuse instead of solving IK

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        if self.num_seeds < 1 or self.timesteps < 4 or not self.dt > 0:
            raise ValueError("need num_seeds >= 1, timesteps >= 4, dt > 0")


@dataclass
class PlanResult:
    trajectory: Trajectory | None
    success: bool
    final_cost: float
    planning_wall_time: float
    stage_stats: dict
    failure_reason: FailureReason | None = None
    candidate_index: int = -1
    ik_solutions: list = field(default_factory=list)


def _chunks(n: int):
    return [np.arange(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]


def _pool_map(pool, fn, items):
    return list(pool.map(fn, items)) if pool is not None else [fn(x) for x in items]


def wrap_toward(robot: RobotModel, q: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Shift revolute joints of ``q`` by multiples of 2 pi toward ``ref`` while staying in limits.

    The pose of the arm is unchanged; only the joint-space distance shrinks.
    """
    q = np.array(q, dtype=float)
    two_pi = 2.0 * np.pi
    rev = ~robot.prismatic.astype(bool)
    k = np.round((ref - q) / two_pi)
    cand = q + k * two_pi
    ok = rev & (cand >= robot.lower) & (cand <= robot.upper)
    q[ok] = cand[ok]
    return q


def plan(robot: RobotModel, scene: WorldScene, req: PlanRequest) -> PlanResult:
    """Plan from ``req.start`` to the pose ``req.goal`` against a frozen scene."""
    t0 = time.perf_counter()
    start = robot.check_config(req.start)
    stats: dict = {}
    w = req.weights

    def fail(reason, traj=None, cost=np.inf, iks=()):
        return PlanResult(traj, False, float(cost), time.perf_counter() - t0, stats, reason, -1, list(iks))

    # stage 1: collision-free IK
    if req.ik_solutions is not None:
        iks = [np.asarray(q, dtype=float) for q in req.ik_solutions]
        stats["ik"] = {"solutions": len(iks), "reused": True}
    else:
        try:
            iks = ik_solve(
                robot,
                scene,
                req.goal,
                n_seeds=req.num_seeds,
                rng_seed=req.rng_seed,
                position_tol=req.position_tol,
                rotation_tol=req.rotation_tol,
                min_clearance=req.safety_margin,
                seed_configs=[start],
                weights=w,
            )
        except Unreachable as exc:
            stats["ik"] = {"solutions": 0, "best_residual": exc.best_residual}
            return fail(FailureReason.IK_FAILED)
        stats["ik"] = {"solutions": len(iks)}
    stats["ik"]["time_s"] = time.perf_counter() - t0
    # nearest goals in joint space make the cheapest seeds
    iks = [wrap_toward(robot, q, start) for q in iks]
    iks = sorted(iks, key=lambda q: float(np.abs(q - start).sum()))[: max(req.max_ik_goals, 1)]

    # stage 2: seeds
    cost = TrajectoryCost(robot, scene, w, req.goal, req.opt_dt, req.hold_orientation, req.collision_substeps)
    n_via = int(round(req.via_fraction * req.num_seeds)) if req.num_seeds > 1 else 0
    n_line = req.num_seeds - n_via
    seeds = seed_trajectories(start, iks, req.timesteps, req.opt_dt, n_line, req.rng_seed + 1)
    seeds += via_point_seeds(
        start, iks, req.timesteps, req.opt_dt, n_via, robot.lower, robot.upper, req.rng_seed + 3, req.via_spread
    )
    knots = np.stack([s.knots for s in seeds])
    if req.warm_start:
        # warm candidates are added on top of the cold seeds, so the best initial
        # cost can only improve on a cold start
        warm = np.stack([np.asarray(t.knots if isinstance(t, Trajectory) else t, dtype=float) for t in req.warm_start])
        if warm.shape[1:] != knots.shape[1:]:
            raise ValueError(f"warm start shape {warm.shape[1:]} does not match {knots.shape[1:]}")
        warm = np.clip(warm, robot.lower, robot.upper)
        warm[:, 0] = start
        knots = np.concatenate([warm, knots], axis=0)

    threads = max(int(req.threads), 1)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        def evaluate(batch):
            parts = _pool_map(pool, lambda idx: cost.value(batch[idx]), _chunks(len(batch)))
            return np.concatenate(parts)

        seed_vals = evaluate(knots)
        stats["seed"] = {"candidates": len(knots), "best_cost": float(seed_vals.min())}

        # stage 3a: particle refinement
        t1 = time.perf_counter()
        knots, pvals, pinfo = particle_refine_batch(
            knots, cost, req.particle_iters, req.rng_seed + 2, req.particle_pop, req.particle_sigma, evaluate=evaluate
        )
        stats["particle"] = {
            "iterations": req.particle_iters,
            "best_cost": float(pvals.min()),
            "history": pinfo.best_cost,
            "evaluations": pinfo.n_evals,
            "time_s": time.perf_counter() - t1,
        }
        t1 = time.perf_counter()

        # stage 3b: L-BFGS on every candidate, chunked across workers
        opts = LbfgsOptions(memory=req.lbfgs_memory, max_iters=req.lbfgs_max_iters, grad_tol=req.grad_tol)
        precond = smoothness_preconditioner(req.timesteps, req.opt_dt, w)

        polish_pre = smoothness_preconditioner(req.timesteps, req.opt_dt, w, False)

        def refine(idx):
            k, f, info = lbfgs_refine_batch(knots[idx], cost, opts, precond)
            pk, pf = k[:0], f[:0]
            if req.polish_iters > 0:
                # snap the terminal knot onto the goal, then smooth with it fixed
                pk = k.copy()
                pk[:, -1] = project_to_goal(robot, k[:, -1], req.goal)
                popts = replace(opts, max_iters=req.polish_iters, free_terminal=False)
                pk, pf, info2 = lbfgs_refine_batch(pk, cost, popts, polish_pre)
                info.iterations = info.iterations + info2.iterations
                info.line_search_failed = info.line_search_failed | info2.line_search_failed
                info.n_evals += info2.n_evals
            return k, f, pk, pf, info

        results = _pool_map(pool, refine, _chunks(len(knots)))
    finally:
        if pool is not None:
            pool.shutdown()
    # free-terminal results first, polished ones after: both stay selectable
    knots = np.concatenate([r[0] for r in results] + [r[2] for r in results])
    final = np.concatenate([r[1] for r in results] + [r[3] for r in results])
    iters = np.concatenate([r[4].iterations for r in results])
    stats["lbfgs"] = {
        "iterations": int(iters.max()),
        "mean_iterations": float(iters.mean()),
        "best_cost": float(final.min()),
        "line_search_failures": int(sum(r[4].line_search_failed.sum() for r in results)),
        "evaluations": int(sum(r[4].n_evals for r in results)),
        "time_s": time.perf_counter() - t1,
    }
    stats["cost_evaluations"] = cost.n_evals

    # selection: cheapest candidate that passes a cheap feasibility screen
    knots = np.clip(knots, robot.lower, robot.upper)
    pos_err, rot_err = goal_residual(robot, knots[:, -1], req.goal)
    n_c, T, D = knots.shape
    frac = np.arange(4) / 4.0
    dense = knots[:, :-1, None, :] * (1 - frac[None, None, :, None]) + knots[:, 1:, None, :] * frac[None, None, :, None]
    clear = batch_min_clearance(robot, scene, dense.reshape(n_c, -1, D)).min(axis=1)
    clear = np.minimum(clear, batch_min_clearance(robot, scene, knots[:, -1]))
    feasible = (clear >= req.safety_margin) & (pos_err < req.position_tol) & (rot_err < req.rotation_tol)
    pool_idx = np.nonzero(feasible)[0] if np.any(feasible) else np.arange(n_c)
    best = int(pool_idx[np.argmin(final[pool_idx])])  # argmin keeps the lowest index on ties
    stats["selection"] = {"feasible_candidates": int(feasible.sum()), "index": best}

    traj = retime(Trajectory(req.dt, knots[best]), robot)
    sweep = sweep_check(robot, scene, traj, req.safety_margin)
    stats["sweep"] = {"collision_free": sweep.collision_free, "min_clearance": sweep.min_clearance}
    final_cost = float(final[best])
    reason = None
    if not (sweep.collision_free and dense_validate(robot, scene, traj, req.safety_margin, 8)):
        reason = FailureReason.COLLISION_RESIDUAL
    elif not (pos_err[best] < req.position_tol and rot_err[best] < req.rotation_tol):
        reason = FailureReason.GOAL_TOLERANCE
    return PlanResult(
        traj,
        reason is None,
        final_cost,
        time.perf_counter() - t0,
        stats,
        reason,
        best,
        iks,
    )
