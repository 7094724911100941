"""Multi-seed damped-least-squares IK with collision rejection."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..costs import CostWeights
from ..errors import Unreachable
from ..model import Kinematics, RobotModel
from ..transforms import Pose, mm, so3_log
from ..world import WorldScene


def _pose_error(kin: Kinematics, goal: Pose) -> np.ndarray:
    """World-frame twist error ``[p_g - p, log(R_g R^T)]`` of shape ``(..., 6)``."""
    dp = goal.position - kin.ee_pos
    e = so3_log(mm(goal.rotation, np.swapaxes(kin.ee_rot, -1, -2)))
    return np.concatenate([dp, e], axis=-1)


def _state(robot: RobotModel, scene: WorldScene, q: np.ndarray, margin: float, w_coll: float, grad: bool):
    value, g, minw, mins, eep, eer, jax, jpos = kernels.chain_collision(robot, scene, q, margin, w_coll, grad)
    kin = Kinematics(None, None, jax, jpos, eer, eep)
    return kin, value, g, np.minimum(minw, mins)


def ik_solve(
    robot: RobotModel,
    scene: WorldScene,
    goal: Pose,
    n_seeds: int = 32,
    rng_seed: int = 0,
    *,
    position_tol: float = 1e-3,
    rotation_tol: float = 1e-2,
    min_clearance: float = 0.0,
    max_iters: int = 120,
    damping: float = 1e-2,
    seed_configs=None,
    weights: CostWeights | None = None,
    return_all: bool = False,
    converge_tol: float = 1e-9,
):
    """Collision-free IK solutions for ``goal``, ranked by residual then clearance.

    ``n_seeds`` configurations are drawn uniformly inside the joint limits (plus any
    ``seed_configs``) and descended together. Each step is a damped least-squares
    update on the pose error plus a null-space push away from obstacles. Solutions
    within 1e-3 rad of a better-ranked one are dropped. Descent stops early once every
    seed has position error and rotation error (rad) below ``converge_tol``.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    w = weights or CostWeights()
    rng = np.random.default_rng(rng_seed)
    q = rng.uniform(robot.lower, robot.upper, size=(n_seeds, robot.dof))
    if seed_configs is not None:
        extra = np.atleast_2d(np.asarray(seed_configs, dtype=float))
        q = np.concatenate([robot.clamp(extra), q], axis=0)
    D = robot.dof
    eye6 = np.eye(6)
    # the collision push is weak relative to the pose step, scaled per joint
    push = 1e-3 / max(w.w_coll, 1e-12)
    max_step = 0.4
    for _ in range(max_iters):
        kin, cval, cgrad, clear = _state(robot, scene, q, w.activation_margin, w.w_coll, True)
        err = _pose_error(kin, goal)
        jac = robot.ee_jacobian(kin)  # (n, 6, D)
        jjt = (jac[:, :, None, :] * jac[:, None, :, :]).sum(axis=-1) + damping**2 * eye6
        y = np.linalg.solve(jjt, err[..., None])[..., 0]
        dq = (jac * y[:, :, None]).sum(axis=1)
        # null-space projection of the collision gradient (zero for D <= 6 at full rank)
        jpinv_j = (jac[:, :, :, None] * np.linalg.solve(jjt, jac)[:, :, None, :]).sum(axis=1)
        null = np.eye(D) - jpinv_j
        dq -= push * (null * cgrad[:, None, :]).sum(axis=-1)
        big = np.abs(dq).max(axis=1, keepdims=True)
        dq *= np.minimum(1.0, max_step / np.maximum(big, 1e-300))
        q = np.clip(q + dq, robot.lower, robot.upper)
        if max(np.linalg.norm(err[:, :3], axis=1).max(), np.linalg.norm(err[:, 3:], axis=1).max()) < converge_tol:
            break
    kin, _, _, clear = _state(robot, scene, q, w.activation_margin, w.w_coll, False)
    err = _pose_error(kin, goal)
    pos_err = np.linalg.norm(err[:, :3], axis=1)
    rot_err = np.linalg.norm(err[:, 3:], axis=1)
    residual = pos_err + rot_err
    ok = (pos_err < position_tol) & (rot_err < rotation_tol) & (clear >= min_clearance) & robot.within_limits(q)
    if not np.any(ok):
        raise Unreachable(
            f"no IK seed converged (best residual {residual.min():.3g})", best_residual=float(residual.min())
        )
    idx = np.nonzero(ok)[0]
    order = idx[np.lexsort((-clear[idx], residual[idx]))]
    chosen: list[int] = []
    for i in order:
        if all(np.abs(q[i] - q[j]).max() > 1e-3 for j in chosen):
            chosen.append(int(i))
    sols = [q[i].copy() for i in chosen]
    if return_all:
        return sols, {"residual": residual[chosen], "clearance": clear[chosen]}
    return sols


def project_to_goal(robot: RobotModel, q, goal: Pose, iters: int = 50, damping: float = 1e-4, tol: float = 1e-10) -> np.ndarray:
    """Damped least-squares descent from configs ``(n, D)`` onto ``goal`` (no collision term).

    Used to put free terminal knots back onto the goal after trajectory
    refinement; each row moves to a nearby exact solution when one exists.
    """
    q = np.array(np.atleast_2d(q), dtype=float)
    eye6 = np.eye(6)
    for _ in range(iters):
        kin = robot.kinematics(q)
        err = _pose_error(kin, goal)
        if np.all(np.abs(err).max(axis=1) < tol):
            break
        jac = robot.ee_jacobian(kin)
        jjt = (jac[:, :, None, :] * jac[:, None, :, :]).sum(axis=-1) + damping * eye6
        y = np.linalg.solve(jjt, err[..., None])[..., 0]
        dq = (jac * y[:, :, None]).sum(axis=1)
        big = np.abs(dq).max(axis=1, keepdims=True)
        dq *= np.minimum(1.0, 0.2 / np.maximum(big, 1e-300))
        q = np.clip(q + dq, robot.lower, robot.upper)
    return q
