"""Initial trajectory candidates from IK solutions."""
from __future__ import annotations

import numpy as np

from ..trajectory import Trajectory

SEED_SIGMA = 0.05
_BASIS = 4


def smooth_noise(rng: np.random.Generator, n: int, T: int, dof: int, sigma) -> np.ndarray:
    """Zero-mean Gaussian perturbations ``(n, T, dof)`` vanishing at both ends.

    A sine basis keeps samples smooth; the marginal standard deviation at the
    mid knot equals ``sigma``.
    """
    s = np.arange(T) / (T - 1)
    k = np.arange(1, _BASIS + 1)
    basis = np.sin(np.pi * k[:, None] * s[None, :])  # (K, T)
    basis[:, 0] = 0.0
    basis[:, -1] = 0.0
    mid = np.sqrt((np.sin(np.pi * k * 0.5) ** 2).sum())
    z = rng.standard_normal((n, _BASIS, dof)) * (np.asarray(sigma, dtype=float) / mid)
    return (basis[None, :, :, None] * z[:, :, None, :]).sum(axis=1)


def seed_trajectories(start, iks, T: int, dt: float, n: int, rng_seed: int = 0, sigma: float = SEED_SIGMA) -> list[Trajectory]:
    """Straight joint-space lines ``start -> iks[i % len(iks)]``; all but the first
    line per IK solution get perturbed interior knots."""
    if not len(iks):
        raise ValueError("need at least one IK solution")
    start = np.asarray(start, dtype=float)
    rng = np.random.default_rng(rng_seed)
    s = (np.arange(T) / (T - 1))[:, None]
    noise = smooth_noise(rng, n, T, start.shape[0], sigma)
    out = []
    for i in range(n):
        goal = np.asarray(iks[i % len(iks)], dtype=float)
        knots = start + s * (goal - start)
        if i >= len(iks):
            knots = knots + noise[i]
            knots[0], knots[-1] = start, goal
        out.append(Trajectory(dt, knots))
    return out


def via_point_seeds(start, iks, T: int, dt: float, n: int, lower, upper, rng_seed: int = 0, spread: float = 1.0) -> list[Trajectory]:
    """Detour seeds ``start -> iks[i % len(iks)]`` bent through a random via point.

    The via point is the line midpoint plus uniform noise of half-width ``spread``
    per joint, clipped to the limits. The bend is a half-sine bump, so the seed is
    free of kinks and still pinned at both ends.
    """
    start = np.asarray(start, dtype=float)
    rng = np.random.default_rng(rng_seed)
    t = (np.arange(T) / (T - 1))[:, None]
    bump = np.sin(np.pi * t)
    out = []
    for i in range(n):
        goal = np.asarray(iks[i % len(iks)], dtype=float)
        mid = 0.5 * (start + goal)
        via = np.clip(mid + rng.uniform(-spread, spread, start.shape), lower, upper)
        knots = start + t * (goal - start) + bump * (via - mid)
        knots = np.clip(knots, lower, upper)
        knots[0], knots[-1] = start, goal
        out.append(Trajectory(dt, knots))
    return out
