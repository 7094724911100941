"""Sampling-based refinement of trajectory candidates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..trajectory import Trajectory
from .seeds import smooth_noise


@dataclass
class ParticleInfo:
    best_cost: list = field(default_factory=list)  # per iteration, index 0 = seeds
    elites: np.ndarray | None = None
    costs: np.ndarray | None = None
    n_evals: int = 0


def particle_refine_batch(
    knots: np.ndarray,
    cost,
    iters: int = 20,
    rng_seed: int = 0,
    pop_per_elite: int = 4,
    sigma_start: float = 0.4,
    sigma_end: float = 0.02,
    evaluate=None,
):
    """Elite-lineage sampling over ``(N, T, D)`` candidates with fixed endpoints.

    Each iteration takes the top quartile by total cost, draws ``pop_per_elite``
    smooth perturbations around every elite, and the best child replaces its elite
    when it is cheaper. Lineages evolve independently (keeps distinct homotopy
    classes alive); the best cost is non-increasing by construction.
    ``evaluate`` maps a ``(B, T, D)`` batch to costs (defaults to ``cost.value``).
    """
    evaluate = evaluate or cost.value
    pop = np.array(knots, dtype=float)
    N, T, D = pop.shape
    vals = evaluate(pop)
    info = ParticleInfo(best_cost=[float(vals.min())], n_evals=N)
    if iters <= 0 or T < 3:
        info.costs = vals
        return pop, vals, info
    rng = np.random.default_rng(rng_seed)
    n_elite = max(1, N // 4)
    for it in range(iters):
        frac = it / max(iters - 1, 1)
        sigma = sigma_start * (sigma_end / sigma_start) ** frac
        elites = np.argsort(vals, kind="stable")[:n_elite]
        noise = smooth_noise(rng, n_elite * pop_per_elite, T, D, sigma)
        children = np.repeat(pop[elites], pop_per_elite, axis=0) + noise
        cv = evaluate(children).reshape(n_elite, pop_per_elite)
        info.n_evals += len(children)
        best_child = np.argmin(cv, axis=1)
        best_val = cv[np.arange(n_elite), best_child]
        better = best_val < vals[elites]
        for e_i in np.nonzero(better)[0]:
            slot = elites[e_i]
            pop[slot] = children[e_i * pop_per_elite + best_child[e_i]]
            vals[slot] = best_val[e_i]
        info.best_cost.append(float(vals.min()))
    info.elites = np.argsort(vals, kind="stable")[:n_elite]
    info.costs = vals
    return pop, vals, info


def particle_refine(seeds: list[Trajectory], cost, iters: int = 20, rng_seed: int = 0, return_info: bool = False, **kw):
    if not seeds:
        return ([], ParticleInfo()) if return_info else []
    dt = seeds[0].dt
    pop, _, info = particle_refine_batch(np.stack([s.knots for s in seeds]), cost, iters, rng_seed, **kw)
    if iters <= 0:
        out = list(seeds)
    else:
        out = [Trajectory(dt, k) for k in pop]
    return (out, info) if return_info else out
