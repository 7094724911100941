"""Robot-vs-world and self clearance, swept and dense trajectory checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import RobotModel
from .trajectory import Trajectory
from .world import WorldScene

INF = math.inf
DEFAULT_SAFETY_MARGIN = 0.01


@dataclass(frozen=True)
class ClearanceReport:
    min_world_clearance: float
    min_self_clearance: float
    worst_sphere: int  # -1 when no sphere-obstacle pair exists
    worst_obstacle: str | None

    @property
    def min_clearance(self) -> float:
        return min(self.min_world_clearance, self.min_self_clearance)


@dataclass(frozen=True)
class SweepReport:
    collision_free: bool
    first_contact_interval: tuple[float, float] | None
    min_clearance: float
    n_checks: int = 0


def batch_clearance(robot: RobotModel, scene: WorldScene, q: np.ndarray):
    """World and self minimum clearance for configs ``(..., D)``."""
    q = robot.check_config(q)
    lead = q.shape[:-1]
    if robot.n_spheres == 0:
        full = np.full(lead, INF)
        return full, full.copy()
    centers = robot.sphere_centers(robot.kinematics(q))
    flat = centers.reshape(-1, robot.n_spheres, 3)
    if len(scene):
        wc, _, _ = scene.clearance(flat.reshape(-1, 3), np.tile(robot.sphere_radius, flat.shape[0]))
        world = wc.reshape(flat.shape[0], -1).min(axis=1)
    else:
        world = np.full(flat.shape[0], INF)
    if len(robot.self_pairs):
        sc, _ = kernels.pair_clearance(flat, robot.sphere_radius, robot.self_pairs)
        selfc = sc.min(axis=1)
    else:
        selfc = np.full(flat.shape[0], INF)
    return world.reshape(lead), selfc.reshape(lead)


def batch_min_clearance(robot: RobotModel, scene: WorldScene, q: np.ndarray) -> np.ndarray:
    w, s = batch_clearance(robot, scene, q)
    return np.minimum(w, s)


def robot_clearance(robot: RobotModel, scene: WorldScene, q) -> ClearanceReport:
    q = robot.check_config(q)
    if q.ndim != 1:
        raise ValueError("robot_clearance takes a single configuration")
    world = INF
    worst_sphere, worst_obstacle = -1, None
    selfc = INF
    if robot.n_spheres:
        centers = robot.sphere_centers(robot.kinematics(q))
        if len(scene):
            wc, idx, _ = scene.clearance(centers, robot.sphere_radius)
            s = int(np.argmin(wc))
            world, worst_sphere = float(wc[s]), s
            worst_obstacle = scene.obstacles[int(idx[s])].id
        if len(robot.self_pairs):
            sc, _ = kernels.pair_clearance(centers[None], robot.sphere_radius, robot.self_pairs)
            selfc = float(sc.min())
    return ClearanceReport(world, selfc, worst_sphere, worst_obstacle)


def _sphere_speed_bound(robot: RobotModel) -> np.ndarray:
    """Per (sphere, joint) upper bound on |d center / d q_j| over the joint range."""
    dof = robot.dof
    step = np.linalg.norm(robot.o_pos, axis=1)
    travel = np.where(robot.prismatic, np.maximum(np.abs(robot.lower), np.abs(robot.upper)), 0.0)
    out = np.zeros((robot.n_spheres, dof))
    for s, link in enumerate(robot.sphere_link):
        local = float(np.linalg.norm(robot.sphere_center[s]))
        for j in range(link + 1):
            if robot.prismatic[j]:
                out[s, j] = 1.0
            else:
                arm = step[j + 1 : link + 1].sum() + travel[j + 1 : link + 1].sum() + local
                out[s, j] = arm
    return out


def dense_validate(robot: RobotModel, scene: WorldScene, traj: Trajectory, margin: float, oversample: int = 8) -> bool:
    """True iff clearance >= margin at every knot and at ``oversample`` points per interval."""
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    pts = traj.oversampled(oversample)
    return bool(np.all(batch_min_clearance(robot, scene, pts) >= margin))


def sweep_check(
    robot: RobotModel,
    scene: WorldScene,
    traj: Trajectory,
    safety_margin: float = DEFAULT_SAFETY_MARGIN,
    tol_s: float | None = None,
    resolution: int = 4,
) -> SweepReport:
    """Swept clearance check with linear joint interpolation between knots.

    Samples at ``resolution`` points per knot interval are certified from both ends:
    a sphere moves at most ``L`` m/s along a segment, so clearance ``c`` at an
    endpoint clears the next ``(c - margin) / L`` seconds. Uncertified intervals are
    bisected until certified, an unsafe instant is found, or they are narrower than
    ``tol_s``. The first unsafe instant is then bracketed against the preceding safe
    instant by binary search to width ``tol_s``.
    """
    tol = traj.dt / 1024.0 if tol_s is None else float(tol_s)
    if not tol > 0:
        raise ValueError("tol_s must be positive")
    m = safety_margin
    n = max(int(resolution), 1)
    times = np.concatenate([np.arange((traj.n_knots - 1) * n) * (traj.dt / n), [traj.duration]])
    clear = batch_min_clearance(robot, scene, traj.at(times))
    n_checks = len(times)
    min_clear = float(clear.min())

    if clear[0] < m:
        return SweepReport(False, (0.0, tol), min_clear, n_checks)

    # per-interval joint speed bounds for the Lipschitz constant of clearance
    speed = _sphere_speed_bound(robot)
    qdot = np.abs(np.diff(traj.knots, axis=0)) / traj.dt  # (T-1, D)
    lip_knot = 2.0 * (qdot @ speed.T).max(axis=1) if robot.n_spheres else np.zeros(len(qdot))
    lip_knot = np.maximum(lip_knot, 1e-12)

    def lipschitz(t0):
        k = np.minimum((np.asarray(t0) / traj.dt).astype(int), traj.n_knots - 2)
        return lip_knot[k]

    t_lo, t_hi = times[:-1], times[1:]
    c_lo, c_hi = clear[:-1], clear[1:]
    seen = [times]
    unsafe_t = times[clear < m]
    first_unsafe = unsafe_t[0] if len(unsafe_t) else INF
    while len(t_lo):
        keep = (t_lo < first_unsafe) & (c_lo >= m) & (c_hi >= m)
        lip = lipschitz(t_lo)
        reach = (c_lo - m) / lip + (c_hi - m) / lip
        keep &= reach < (t_hi - t_lo)
        keep &= (t_hi - t_lo) > tol
        if not np.any(keep):
            break
        t_lo, t_hi, c_lo, c_hi = t_lo[keep], t_hi[keep], c_lo[keep], c_hi[keep]
        t_mid = 0.5 * (t_lo + t_hi)
        c_mid = batch_min_clearance(robot, scene, traj.at(t_mid))
        n_checks += len(t_mid)
        seen.append(t_mid)
        min_clear = min(min_clear, float(c_mid.min()))
        bad = c_mid < m
        if np.any(bad):
            first_unsafe = min(first_unsafe, float(t_mid[bad].min()))
        t_lo, t_hi = np.concatenate([t_lo, t_mid]), np.concatenate([t_mid, t_hi])
        c_lo, c_hi = np.concatenate([c_lo, c_mid]), np.concatenate([c_mid, c_hi])

    if not math.isfinite(first_unsafe):
        return SweepReport(True, None, min_clear, n_checks)

    # bracket: latest evaluated safe instant before the first unsafe one
    evaluated = np.concatenate(seen)
    lo = float(evaluated[evaluated < first_unsafe].max())
    hi = float(first_unsafe)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        c = float(batch_min_clearance(robot, scene, traj.at(mid)))
        n_checks += 1
        min_clear = min(min_clear, c)
        if c < m:
            hi = mid
        else:
            lo = mid
    return SweepReport(False, (lo, hi), min_clear, n_checks)
