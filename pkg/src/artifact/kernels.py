"""Backend selection for the distance kernels.

The compiled extension is used when it imports; otherwise the numpy version.
``use_backend`` switches explicitly (benchmarks and parity tests).
"""
from __future__ import annotations

import numpy as np

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

BACKEND = "compiled" if _ckernels is not None else "python"
_impl = _BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def use_backend(name: str) -> str:
    """Select a backend by name; returns the previous one."""
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    prev = BACKEND
    BACKEND, _impl = name, _BACKENDS[name]
    return prev


def world_clearance(centers, radii, obs_rot, obs_pos, obs_kind, obs_dims):
    """Per-sphere minimum clearance, nearest obstacle index, and outward normal.

    Clearance = signed distance of the center to the obstacle surface minus the
    sphere radius; the normal is the gradient of that distance w.r.t. the center.
    """
    centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
    radii = np.ascontiguousarray(np.broadcast_to(radii, centers.shape[:1]), dtype=np.float64)
    return _impl.world_clearance(
        centers,
        radii,
        np.ascontiguousarray(obs_rot, dtype=np.float64).reshape(-1, 3, 3),
        np.ascontiguousarray(obs_pos, dtype=np.float64).reshape(-1, 3),
        np.ascontiguousarray(obs_kind, dtype=np.int32),
        np.ascontiguousarray(obs_dims, dtype=np.float64).reshape(-1, 3),
    )


def pair_clearance(centers, radii, pairs):
    """Clearance ``|c_p - c_q| - r_p - r_q`` for sphere pairs, batched over rows."""
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    return _impl.pair_clearance(
        centers,
        np.ascontiguousarray(radii, dtype=np.float64),
        np.ascontiguousarray(pairs, dtype=np.intp).reshape(-1, 2),
    )


def chain_collision(robot, scene, q, margin: float, w_coll: float, want_grad: bool = True):
    """Forward kinematics plus sphere collision hinge cost for configs ``(P, D)``.

    Returns ``(value, grad, min_world, min_self, ee_pos, ee_rot, joint_axis, joint_pos)``
    where ``value = w_coll * sum(max(0, margin - clearance)^2)`` over sphere-obstacle
    minima and non-ignored self pairs.
    """
    q = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, robot.dof)
    rot, pos, kind, dims = scene.packed
    return _impl.chain_collision(
        q,
        np.ascontiguousarray(robot.base.rotation),
        np.ascontiguousarray(robot.base.position),
        np.ascontiguousarray(robot.o_rot),
        np.ascontiguousarray(robot.o_pos),
        np.ascontiguousarray(robot.o_axis),
        np.ascontiguousarray(robot.ok),
        np.ascontiguousarray(robot.okk),
        np.ascontiguousarray(robot.prismatic, dtype=np.int32),
        np.ascontiguousarray(robot.tool.rotation),
        np.ascontiguousarray(robot.tool.position),
        int(robot.end_effector_link),
        np.ascontiguousarray(robot.sphere_link, dtype=np.intp),
        np.ascontiguousarray(robot.sphere_center),
        np.ascontiguousarray(robot.sphere_radius),
        np.ascontiguousarray(rot),
        np.ascontiguousarray(pos),
        np.ascontiguousarray(kind, dtype=np.int32),
        np.ascontiguousarray(dims),
        np.ascontiguousarray(robot.self_pairs, dtype=np.intp).reshape(-1, 2),
        float(margin),
        float(w_coll),
        bool(want_grad),
    )
