"""Motion planner stages."""
from .ik import ik_solve
from .lbfgs import LbfgsOptions, lbfgs_refine, lbfgs_refine_batch
from .particle import particle_refine, particle_refine_batch
from .planner import FailureReason, PlanRequest, PlanResult, plan
from .retime import retime, retime_scale
from .seeds import seed_trajectories

__all__ = [
    "FailureReason",
    "LbfgsOptions",
    "PlanRequest",
    "PlanResult",
    "ik_solve",
    "lbfgs_refine",
    "lbfgs_refine_batch",
    "particle_refine",
    "particle_refine_batch",
    "plan",
    "retime",
    "retime_scale",
    "seed_trajectories",
]
