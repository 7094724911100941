"""Uniform time scaling to joint rate limits."""
from __future__ import annotations

import numpy as np

from ..model import RobotModel
from ..trajectory import Trajectory


def retime_scale(traj: Trajectory, limits) -> float:
    """Smallest s >= 1 such that scaling dt by s satisfies every rate limit."""
    vmax, amax, jmax = _rates(limits)
    v, a, j = traj.derivatives()
    s = 1.0
    if v.size:
        s = max(s, float((np.abs(v) / vmax).max()))
    if a.size:
        s = max(s, float(np.sqrt((np.abs(a) / amax).max())))
    if j.size:
        s = max(s, float(np.cbrt((np.abs(j) / jmax).max())))
    return s


def retime(traj: Trajectory, limits) -> Trajectory:
    """Stretch ``dt`` (knots unchanged) so velocity, acceleration and jerk fit the limits."""
    s = retime_scale(traj, limits)
    return traj if s == 1.0 else traj.with_dt(traj.dt * s)


def _rates(limits):
    if isinstance(limits, RobotModel):
        return limits.max_velocity, limits.max_acceleration, limits.max_jerk
    lims = list(limits)
    return (
        np.array([l.max_velocity for l in lims]),
        np.array([l.max_acceleration for l in lims]),
        np.array([l.max_jerk for l in lims]),
    )
