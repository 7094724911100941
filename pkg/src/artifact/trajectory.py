"""Uniformly time-stepped joint trajectories."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True, eq=False)
class Trajectory:
    dt: float
    knots: np.ndarray  # (T, D)

    def __post_init__(self):
        k = np.array(self.knots, dtype=float)
        if k.ndim != 2 or k.shape[0] < 2:
            raise ValidationError(f"trajectory needs a (T>=2, D) knot matrix, got shape {k.shape}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not np.all(np.isfinite(k)):
            raise ValidationError("trajectory contains non-finite values")
        k.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_knots(self) -> int:
        return self.knots.shape[0]

    @property
    def dof(self) -> int:
        return self.knots.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_knots - 1) * self.dt

    @property
    def start(self) -> np.ndarray:
        return self.knots[0]

    @property
    def end(self) -> np.ndarray:
        return self.knots[-1]

    def times(self) -> np.ndarray:
        return np.arange(self.n_knots) * self.dt

    def at(self, t) -> np.ndarray:
        """Joint values at time(s) ``t`` by linear interpolation (clamped to the ends)."""
        t = np.asarray(t, dtype=float)
        s = np.clip(t / self.dt, 0.0, self.n_knots - 1)
        i = np.minimum(np.floor(s).astype(int), self.n_knots - 2)
        f = (s - i)[..., None]
        a = self.knots[i]
        return a + (self.knots[i + 1] - a) * f  # exact when both knots agree

    def oversampled(self, per_interval: int) -> np.ndarray:
        """Knots plus ``per_interval - 1`` interpolated points inside each interval."""
        n = max(int(per_interval), 1)
        frac = np.arange(n) / n
        a, b = self.knots[:-1], self.knots[1:]
        pts = a[:, None, :] * (1.0 - frac[None, :, None]) + b[:, None, :] * frac[None, :, None]
        return np.concatenate([pts.reshape(-1, self.dof), self.knots[-1:]], axis=0)

    def derivatives(self):
        """Backward-difference velocity, acceleration, jerk."""
        v = np.diff(self.knots, axis=0) / self.dt
        a = np.diff(v, axis=0) / self.dt
        j = np.diff(a, axis=0) / self.dt
        return v, a, j

    def with_dt(self, dt: float) -> "Trajectory":
        return Trajectory(dt, self.knots)

    def to_dict(self, joint_names=None) -> dict:
        names = list(joint_names) if joint_names is not None else [f"j{i}" for i in range(self.dof)]
        return {"dt": self.dt, "joint_names": names, "knots": self.knots.tolist()}

    def to_json(self, joint_names=None) -> str:
        return json.dumps(self.to_dict(joint_names), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        try:
            return cls(float(d["dt"]), np.asarray(d["knots"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed trajectory document ({exc})") from exc

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed trajectory JSON: {exc}") from exc

    @classmethod
    def linear(cls, start, end, n_knots: int, dt: float) -> "Trajectory":
        s = (np.arange(n_knots) / (n_knots - 1))[:, None]
        a, b = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
        return cls(dt, a + s * (b - a))
