"""Batched L-BFGS over trajectory knots with Armijo backtracking.

Every candidate in a batch keeps its own history and step size; the batch only
shares cost evaluations. Rows never influence each other, so results do not
depend on how candidates are grouped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..trajectory import Trajectory


@dataclass(frozen=True)
class LbfgsOptions:
    memory: int = 10
    max_iters: int = 100
    grad_tol: float = 1e-6
    ftol: float = 1e-10
    c1: float = 1e-4
    max_backtracks: int = 30
    first_step: float = 0.05  # max |dq| of the first (steepest-descent) step, rad
    free_terminal: bool = True


@dataclass
class LbfgsInfo:
    iterations: np.ndarray  # per candidate
    converged: np.ndarray
    line_search_failed: np.ndarray
    initial_cost: np.ndarray
    final_cost: np.ndarray
    n_evals: int


def _two_loop(g, S, Y, rho, count, head, m, precond=None):
    """H^-1 g for each row using its ring-buffer history.

    ``precond`` maps ``(B, n)`` to ``(B, n)`` and replaces the identity as the
    initial inverse Hessian (scaled by the usual secant factor).
    """
    q = g.copy()
    B = g.shape[0]
    alpha = np.zeros((B, m))
    rows = np.arange(B)
    for k in range(m):
        idx = (head - 1 - k) % m
        valid = k < count
        if not np.any(valid):
            break
        s, y, r = S[rows, idx], Y[rows, idx], rho[rows, idx]
        a = np.where(valid, r * (s * q).sum(axis=1), 0.0)
        alpha[:, k] = a
        q -= a[:, None] * y
    last = (head - 1) % m
    s, y = S[rows, last], Y[rows, last]
    py = precond(y) if precond is not None else y
    yy = (y * py).sum(axis=1)
    gamma = np.where(count > 0, (s * y).sum(axis=1) / np.where(yy > 0, yy, 1.0), 1.0)
    r = gamma[:, None] * (precond(q) if precond is not None else q)
    for k in range(m - 1, -1, -1):
        idx = (head - 1 - k) % m
        valid = k < count
        if not np.any(valid):
            continue
        s, y, rr = S[rows, idx], Y[rows, idx], rho[rows, idx]
        b = rr * (y * r).sum(axis=1)
        r += np.where(valid, alpha[:, k] - b, 0.0)[:, None] * s
    return r


def smoothness_preconditioner(T: int, dt: float, w, free_terminal: bool = True, mu: float = 1.0):
    """Inverse of the (constant) smoothness Hessian over the free knots plus ``mu`` I.

    Returns a function acting on flattened ``(B, n_free * D)`` rows. The same
    matrix applies to every joint column.
    """
    def diff(k):
        d = np.eye(T)
        for _ in range(k):
            d = (d[1:] - d[:-1]) / dt
        return d

    A = 2.0 * (w.w_v * diff(1).T @ diff(1) + w.w_a * diff(2).T @ diff(2) + w.w_j * diff(3).T @ diff(3))
    hi = T if free_terminal else T - 1
    A = A[1:hi, 1:hi]
    P = np.linalg.inv(A + mu * np.eye(hi - 1))
    nf = hi - 1

    def apply(x):
        B = x.shape[0]
        x3 = x.reshape(B, nf, -1)
        return np.einsum("ij,bjd->bid", P, x3).reshape(B, -1)

    return apply


def lbfgs_refine_batch(knots: np.ndarray, cost, opts: LbfgsOptions = LbfgsOptions(), precond=None):
    """Refine trajectories ``(B, T, D)``; start knots fixed, terminal free if requested.

    Returns ``(knots, cost_values, LbfgsInfo)``. Accepted steps satisfy Armijo, so
    each row's cost never increases.
    """
    knots = np.array(knots, dtype=float)
    B, T, D = knots.shape
    hi = T if opts.free_terminal else T - 1
    sl = slice(1, hi)
    n = (hi - 1) * D

    def f_and_g(rows, x):
        k = knots[rows].copy()
        k[:, sl] = x.reshape(len(rows), hi - 1, D)
        v, g = cost.evaluate(k)
        return v, g[:, sl].reshape(len(rows), n)

    all_rows = np.arange(B)
    x = knots[:, sl].reshape(B, n).copy()
    f, g = f_and_g(all_rows, x)
    n_evals = B
    f0 = f.copy()
    m = max(int(opts.memory), 1)
    S = np.zeros((B, m, n))
    Y = np.zeros((B, m, n))
    rho = np.zeros((B, m))
    count = np.zeros(B, dtype=int)
    head = np.zeros(B, dtype=int)
    iters = np.zeros(B, dtype=int)
    failed = np.zeros(B, dtype=bool)
    gnorm = np.linalg.norm(g, axis=1)
    done = gnorm < opts.grad_tol
    converged = done.copy()

    for _ in range(opts.max_iters):
        act = np.nonzero(~done)[0]
        if len(act) == 0:
            break
        ga = g[act]
        d = -_two_loop(ga, S[act], Y[act], rho[act], count[act], head[act], m, precond)
        slope = (d * ga).sum(axis=1)
        bad = (count[act] == 0) | ~(slope < 0)
        if np.any(bad):
            gb = precond(ga[bad]) if precond is not None else ga[bad]
            gmax = np.abs(gb).max(axis=1, keepdims=True)
            d[bad] = -gb * (opts.first_step / np.maximum(gmax, 1e-300))
            count[act[bad]] = 0
            slope = (d * ga).sum(axis=1)
        alpha = np.ones(len(act))
        pending = np.ones(len(act), dtype=bool)
        x_new = x[act].copy()
        f_new = f[act].copy()
        g_new = ga.copy()
        for _bt in range(opts.max_backtracks):
            p = np.nonzero(pending)[0]
            if len(p) == 0:
                break
            trial = x[act[p]] + alpha[p, None] * d[p]
            fv, gv = f_and_g(act[p], trial)
            n_evals += len(p)
            ok = fv <= f[act[p]] + opts.c1 * alpha[p] * slope[p]
            okp = p[ok]
            x_new[okp], f_new[okp], g_new[okp] = trial[ok], fv[ok], gv[ok]
            pending[okp] = False
            alpha[p[~ok]] *= 0.5
        ls_fail = pending
        ok_idx = np.nonzero(~ls_fail)[0]
        rows = act[ok_idx]
        s = x_new[ok_idx] - x[rows]
        y = g_new[ok_idx] - g[rows]
        sy = (s * y).sum(axis=1)
        good = sy > 1e-12 * np.linalg.norm(s, axis=1) * np.linalg.norm(y, axis=1)
        gr = rows[good]
        if len(gr):
            h = head[gr]
            S[gr, h] = s[good]
            Y[gr, h] = y[good]
            rho[gr, h] = 1.0 / sy[good]
            head[gr] = (h + 1) % m
            count[gr] = np.minimum(count[gr] + 1, m)
        fprev = f[rows].copy()
        x[rows], f[rows], g[rows] = x_new[ok_idx], f_new[ok_idx], g_new[ok_idx]
        iters[rows] += 1
        failed[act[ls_fail]] = True
        done[act[ls_fail]] = True
        gn = np.linalg.norm(g[rows], axis=1)
        conv = gn < opts.grad_tol
        stall = (fprev - f[rows]) <= opts.ftol * np.maximum(1.0, np.abs(fprev))
        converged[rows[conv]] = True
        done[rows[conv | stall]] = True

    out = knots.copy()
    out[:, sl] = x.reshape(B, hi - 1, D)
    info = LbfgsInfo(iters, converged, failed, f0, f.copy(), n_evals)
    return out, f, info


def lbfgs_refine(traj: Trajectory, cost, opts: LbfgsOptions = LbfgsOptions(), return_info: bool = False):
    """Single-trajectory wrapper around :func:`lbfgs_refine_batch`.

    A failed line search stops early and returns the best iterate; the failure is
    reported in ``info.line_search_failed`` when ``return_info`` is set.
    """
    k, _, info = lbfgs_refine_batch(traj.knots[None], cost, opts)
    out = Trajectory(traj.dt, k[0])
    return (out, info) if return_info else out
