"""Differentiable cost terms over joint trajectories.

All terms are evaluated on batches of trajectories ``(B, T, D)`` sharing one
forward-kinematics pass; the single-trajectory functions wrap the batch code.
"""
from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import kernels
from .errors import ConfigError, DimensionMismatch, ParseError, ValidationError
from .model import Kinematics, RobotModel
from .trajectory import Trajectory
from .transforms import Pose, mm, mtv, mv, so3_log, so3_right_jacobian_inv
from .world import WorldScene

__all__ = [
    "CostWeights",
    "CostEval",
    "Trajectory",
    "TrajectoryCost",
    "goal_cost",
    "smooth_cost",
    "collision_cost",
    "hold_orientation_cost",
    "goal_residual",
]


@dataclass(frozen=True)
class CostWeights:
    w_pos: float = 15000.0
    w_rot: float = 1800.0
    w_v: float = 1.0
    w_a: float = 1.0
    w_j: float = 1.0
    w_coll: float = 5000.0
    activation_margin: float = 0.05
    hold_vec_weight: tuple = (1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    w_hold: float = 2000.0
    w_limit: float = 1000.0

    def __post_init__(self):
        hv = tuple(float(x) for x in self.hold_vec_weight)
        if len(hv) != 6:
            raise ValidationError("hold_vec_weight needs 6 entries (rot xyz, lin xyz)")
        object.__setattr__(self, "hold_vec_weight", hv)
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            if any(not (x >= 0) for x in vals):
                raise ValidationError(f"weight {f.name} must be >= 0, got {v}")

    def replace(self, **changes) -> "CostWeights":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hold_vec_weight"] = list(self.hold_vec_weight)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "CostWeights":
        d = dict(d or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown weight fields {sorted(unknown)}")
        try:
            if "hold_vec_weight" in d:
                d["hold_vec_weight"] = tuple(d["hold_vec_weight"])
            return cls(**{k: (v if k == "hold_vec_weight" else float(v)) for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed weights ({exc})") from exc

    @classmethod
    def load(cls, text: str) -> "CostWeights":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ParseError(f"malformed YAML: {exc}") from exc
        if isinstance(doc, dict) and "weights" in doc:
            doc = doc["weights"]
        return cls.from_dict(doc)


@dataclass
class CostEval:
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class _Limits:
    lower: np.ndarray
    upper: np.ndarray
    max_velocity: np.ndarray
    max_acceleration: np.ndarray
    max_jerk: np.ndarray


def _limit_arrays(limits) -> _Limits | None:
    if limits is None:
        return None
    if isinstance(limits, RobotModel):
        r = limits
        return _Limits(r.lower, r.upper, r.max_velocity, r.max_acceleration, r.max_jerk)
    if isinstance(limits, _Limits):
        return limits
    lims = list(limits)
    return _Limits(*(np.array([getattr(l, f) for l in lims]) for f in
                     ("lower", "upper", "max_velocity", "max_acceleration", "max_jerk")))


# -- batch term implementations --------------------------------------------------------

def _diff_adjoint(g: np.ndarray, dt: float) -> np.ndarray:
    """Adjoint of ``x -> diff(x, axis=-2) / dt``."""
    shape = list(g.shape)
    shape[-2] += 1
    out = np.zeros(shape)
    out[..., 1:, :] += g / dt
    out[..., :-1, :] -= g / dt
    return out


def _hinge_sq(x: np.ndarray, bound: np.ndarray):
    """sum max(0, |x| - bound)^2 and its gradient."""
    over = np.maximum(np.abs(x) - bound, 0.0)
    return (over * over).sum(axis=(-2, -1)), 2.0 * over * np.sign(x)


def _smooth_batch(knots: np.ndarray, dt: float, w: CostWeights, lim: _Limits | None):
    value = np.zeros(knots.shape[0])
    grad = np.zeros_like(knots)
    T = knots.shape[-2]
    if T < 2:
        return value, grad
    v = np.diff(knots, axis=-2) / dt
    a = np.diff(v, axis=-2) / dt if T >= 3 else None
    j = np.diff(a, axis=-2) / dt if T >= 4 else None
    gv = 2.0 * w.w_v * v
    value += w.w_v * (v * v).sum(axis=(-2, -1))
    ga = None
    if a is not None:
        value += w.w_a * (a * a).sum(axis=(-2, -1))
        ga = 2.0 * w.w_a * a
    gj = None
    if j is not None:
        value += w.w_j * (j * j).sum(axis=(-2, -1))
        gj = 2.0 * w.w_j * j
    if lim is not None and w.w_limit > 0:
        wl = w.w_limit
        lo_over = np.maximum(lim.lower - knots, 0.0)
        hi_over = np.maximum(knots - lim.upper, 0.0)
        value += wl * ((lo_over * lo_over).sum(axis=(-2, -1)) + (hi_over * hi_over).sum(axis=(-2, -1)))
        grad += wl * 2.0 * (hi_over - lo_over)
        hv, dv = _hinge_sq(v, lim.max_velocity)
        value += wl * hv
        gv = gv + wl * dv
        if a is not None:
            ha, da = _hinge_sq(a, lim.max_acceleration)
            value += wl * ha
            ga = ga + wl * da
        if j is not None:
            hj, dj = _hinge_sq(j, lim.max_jerk)
            value += wl * hj
            gj = gj + wl * dj
    if gj is not None:
        ga = ga + _diff_adjoint(gj, dt)
    if ga is not None:
        gv = gv + _diff_adjoint(ga, dt)
    grad += _diff_adjoint(gv, dt)
    return value, grad


def chain_state(robot: RobotModel, scene: WorldScene, knots: np.ndarray, w: CostWeights, want_grad: bool = True):
    """One kernel pass over every knot: collision value/grad, clearances, EE kinematics."""
    lead = knots.shape[:-1]
    flat = knots.reshape(-1, robot.dof)
    value, grad, minw, mins, eep, eer, jax, jpos = kernels.chain_collision(
        robot, scene, flat, w.activation_margin, w.w_coll, want_grad
    )
    D = robot.dof
    kin = Kinematics(
        None,
        None,
        jax.reshape(lead + (D, 3)),
        jpos.reshape(lead + (D, 3)),
        eer.reshape(lead + (3, 3)),
        eep.reshape(lead + (3,)),
    )
    clearance = np.minimum(minw, mins).reshape(lead)
    return value.reshape(lead), grad.reshape(lead + (D,)), clearance, kin


def _goal_batch(robot: RobotModel, kin_last: Kinematics, goal: Pose, w: CostWeights):
    """Goal cost on end-effector states ``(B, ...)``; returns value and joint grad."""
    dp = kin_last.ee_pos - goal.position
    e = so3_log(mm(goal.rotation, np.swapaxes(kin_last.ee_rot, -1, -2)))
    value = w.w_pos * (dp * dp).sum(axis=-1) + w.w_rot * (e * e).sum(axis=-1)
    jac = robot.ee_jacobian(kin_last)  # (..., 6, D)
    g6 = np.concatenate([2.0 * w.w_pos * dp, -2.0 * w.w_rot * e], axis=-1)
    grad = (jac * g6[..., :, None]).sum(axis=-2)
    return value, grad


def _hold_batch(robot: RobotModel, kin: Kinematics, ref: Pose, w: CostWeights):
    hv = np.asarray(w.hold_vec_weight)
    lead = kin.ee_pos.shape[:-1]
    if w.w_hold == 0 or not np.any(hv):
        return np.zeros(lead), np.zeros(lead + (robot.dof,))
    r_ref = ref.rotation
    e = so3_log(mm(r_ref.T, kin.ee_rot))
    value = w.w_hold * (hv[:3] * e * e).sum(axis=-1)
    # right perturbation: d e = Jr^-1(e) R^T omega
    ge = 2.0 * w.w_hold * hv[:3] * e
    g_omega = mv(kin.ee_rot, mtv(so3_right_jacobian_inv(e), ge))
    jac = robot.ee_jacobian(kin)
    grad = (jac[..., 3:, :] * g_omega[..., :, None]).sum(axis=-2)
    if np.any(hv[3:]):
        el = mtv(r_ref, kin.ee_pos - ref.position)
        value = value + w.w_hold * (hv[3:] * el * el).sum(axis=-1)
        g_p = mv(r_ref, 2.0 * w.w_hold * hv[3:] * el)
        grad = grad + (jac[..., :3, :] * g_p[..., :, None]).sum(axis=-2)
    return value, grad


def _take_last(kin: Kinematics) -> Kinematics:
    return Kinematics(*(None if a is None else a[:, -1] for a in kin))


class TrajectoryCost:
    """Total planning cost for batches of trajectories against a frozen scene.

    The start knot is treated as given; the terminal knot is pulled toward
    ``goal`` through forward kinematics.
    """

    def __init__(
        self,
        robot: RobotModel,
        scene: WorldScene,
        weights: CostWeights,
        goal: Pose | None,
        dt: float,
        hold_ref: Pose | None = None,
        collision_substeps: int = 1,
    ):
        self.robot = robot
        self.scene = scene
        self.weights = weights
        self.goal = goal
        self.dt = float(dt)
        self.hold_ref = hold_ref
        self.limits = _limit_arrays(robot)
        # collision is also penalized at interpolated points between knots so the
        # optimizer cannot hop over thin obstacles in one step
        self.collision_substeps = max(int(collision_substeps), 1)
        self._lock = threading.Lock()
        self.n_evals = 0  # trajectories evaluated

    def _count(self, n: int):
        with self._lock:
            self.n_evals += n

    def terms(self, knots: np.ndarray) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        knots = np.asarray(knots, dtype=float)
        if knots.ndim == 2:
            knots = knots[None]
        if knots.shape[-1] != self.robot.dof:
            raise DimensionMismatch(f"knots have {knots.shape[-1]} columns, robot has {self.robot.dof} joints")
        self._count(knots.shape[0])
        r = self.collision_substeps
        if r == 1:
            cv, cg, _, kin = chain_state(self.robot, self.scene, knots, self.weights)
        else:
            frac = np.arange(r) / r
            B, T, D = knots.shape
            lo, hi = knots[:, :-1, None, :], knots[:, 1:, None, :]
            fr = frac[None, None, :, None]
            dense = np.concatenate([(lo * (1 - fr) + hi * fr).reshape(B, -1, D), knots[:, -1:]], axis=1)
            cv, dg, _, kin = chain_state(self.robot, self.scene, dense, self.weights)
            kin = Kinematics(*(None if a is None else a[:, ::r] for a in kin))
            # scale so a uniform penalty costs the same as at knot resolution
            cv = cv / r
            dg = dg / r
            inner = dg[:, :-1].reshape(B, T - 1, r, D)
            cg = np.zeros_like(knots)
            cg[:, :-1] += (inner * (1 - fr)).sum(axis=2)
            cg[:, 1:] += (inner * fr).sum(axis=2)
            cg[:, -1] += dg[:, -1]
        out = {"smooth": _smooth_batch(knots, self.dt, self.weights, self.limits)}
        out["collision"] = (cv.sum(axis=-1), cg)
        if self.goal is not None:
            gv, gg = _goal_batch(self.robot, _take_last(kin), self.goal, self.weights)
            full = np.zeros_like(knots)
            full[:, -1] = gg
            out["goal"] = (gv, full)
        if self.hold_ref is not None:
            hv, hg = _hold_batch(self.robot, kin, self.hold_ref, self.weights)
            out["hold"] = (hv.sum(axis=-1), hg)
        return out

    def evaluate(self, knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Total cost ``(B,)`` and gradient ``(B, T, D)``."""
        terms = self.terms(knots)
        value = sum(v for v, _ in terms.values())
        grad = sum(g for _, g in terms.values())
        return value, grad

    def value(self, knots: np.ndarray) -> np.ndarray:
        return self.evaluate(knots)[0]


# -- single-trajectory API ---------------------------------------------------------

def _knots(robot: RobotModel | None, traj: Trajectory) -> np.ndarray:
    k = traj.knots
    if robot is not None and k.shape[1] != robot.dof:
        raise DimensionMismatch(f"trajectory has {k.shape[1]} joints, robot has {robot.dof}")
    return k[None]


def goal_cost(robot: RobotModel, traj: Trajectory, goal: Pose, w: CostWeights) -> CostEval:
    """Position L2^2 plus rotation-vector-norm^2 error of the final knot."""
    k = _knots(robot, traj)
    kin = robot.kinematics(k[:, -1])
    v, g = _goal_batch(robot, kin, goal, w)
    grad = np.zeros(traj.knots.shape)
    grad[-1] = g[0]
    return CostEval(float(v[0]), grad)


def smooth_cost(traj: Trajectory, w: CostWeights, limits=None) -> CostEval:
    """Backward-difference velocity/acceleration/jerk penalties plus limit hinges.

    ``limits`` may be a RobotModel, a sequence of JointLimits, or None.
    """
    v, g = _smooth_batch(traj.knots[None], traj.dt, w, _limit_arrays(limits))
    return CostEval(float(v[0]), g[0])


def collision_cost(robot: RobotModel, scene: WorldScene, traj: Trajectory, w: CostWeights) -> CostEval:
    k = _knots(robot, traj)
    v, g, _, _ = chain_state(robot, scene, k, w)
    return CostEval(float(v.sum()), g[0])


def hold_orientation_cost(robot: RobotModel, traj: Trajectory, ref: Pose, w: CostWeights) -> CostEval:
    k = _knots(robot, traj)
    v, g = _hold_batch(robot, robot.kinematics(k), ref, w)
    return CostEval(float(v.sum()), g[0])


def goal_residual(robot: RobotModel, q, goal: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Position error (m) and rotation error (rad) of configs ``(..., D)``."""
    kin = robot.kinematics(robot.check_config(q))
    pos = np.linalg.norm(kin.ee_pos - goal.position, axis=-1)
    rot = np.linalg.norm(so3_log(mm(goal.rotation, np.swapaxes(kin.ee_rot, -1, -2))), axis=-1)
    return pos, rot
