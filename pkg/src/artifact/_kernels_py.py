"""Pure-numpy distance kernels; reference and fallback for ``_ckernels``."""
from __future__ import annotations

import numpy as np


def world_clearance(centers, radii, obs_rot, obs_pos, obs_kind, obs_dims):
    n = centers.shape[0]
    m = obs_pos.shape[0]
    if m == 0 or n == 0:
        return np.full(n, np.inf), np.full(n, -1, dtype=np.intp), np.zeros((n, 3))
    d0 = centers[:, None, 0] - obs_pos[None, :, 0]
    d1 = centers[:, None, 1] - obs_pos[None, :, 1]
    d2 = centers[:, None, 2] - obs_pos[None, :, 2]
    r = obs_rot[None]
    l0 = r[..., 0, 0] * d0 + r[..., 1, 0] * d1 + r[..., 2, 0] * d2
    l1 = r[..., 0, 1] * d0 + r[..., 1, 1] * d1 + r[..., 2, 1] * d2
    l2 = r[..., 0, 2] * d0 + r[..., 1, 2] * d1 + r[..., 2, 2] * d2
    a0 = np.abs(l0) - obs_dims[None, :, 0]
    a1 = np.abs(l1) - obs_dims[None, :, 1]
    a2 = np.abs(l2) - obs_dims[None, :, 2]
    o0 = np.maximum(a0, 0.0)
    o1 = np.maximum(a1, 0.0)
    o2 = np.maximum(a2, 0.0)
    out = np.sqrt(o0 * o0 + o1 * o1 + o2 * o2)
    inside = np.minimum(np.maximum(np.maximum(a0, a1), a2), 0.0)
    dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    is_box = (obs_kind == 0)[None, :]
    sd = np.where(is_box, out + inside, dist - obs_dims[None, :, 0])
    c = sd - radii[:, None]

    idx = np.argmin(c, axis=1)
    rows = np.arange(n)
    clear = c[rows, idx]

    def pick(a):
        return a[rows, idx]

    l0, l1, l2 = pick(l0), pick(l1), pick(l2)
    a0, a1, a2 = pick(a0), pick(a1), pick(a2)
    o0, o1, o2, out = pick(o0), pick(o1), pick(o2), pick(out)
    d0, d1, d2, dist = pick(d0), pick(d1), pick(d2), pick(dist)
    rot = obs_rot[idx]
    box = obs_kind[idx] == 0
    ext = out > 0.0
    safe_out = np.where(ext, out, 1.0)
    e0 = np.where(l0 >= 0.0, o0, -o0) / safe_out
    e1 = np.where(l1 >= 0.0, o1, -o1) / safe_out
    e2 = np.where(l2 >= 0.0, o2, -o2) / safe_out
    kbest = np.where(a1 > a0, 1, 0)
    kbest = np.where(a2 > np.where(kbest == 1, a1, a0), 2, kbest)
    i0 = np.where(kbest == 0, np.where(l0 >= 0.0, 1.0, -1.0), 0.0)
    i1 = np.where(kbest == 1, np.where(l1 >= 0.0, 1.0, -1.0), 0.0)
    i2 = np.where(kbest == 2, np.where(l2 >= 0.0, 1.0, -1.0), 0.0)
    n0 = np.where(ext, e0, i0)
    n1 = np.where(ext, e1, i1)
    n2 = np.where(ext, e2, i2)
    box_normal = np.stack(
        [
            rot[:, 0, 0] * n0 + rot[:, 0, 1] * n1 + rot[:, 0, 2] * n2,
            rot[:, 1, 0] * n0 + rot[:, 1, 1] * n1 + rot[:, 1, 2] * n2,
            rot[:, 2, 0] * n0 + rot[:, 2, 1] * n1 + rot[:, 2, 2] * n2,
        ],
        axis=-1,
    )
    pos = dist > 0.0
    safe_dist = np.where(pos, dist, 1.0)
    sph_normal = np.stack(
        [np.where(pos, d0 / safe_dist, 1.0), np.where(pos, d1 / safe_dist, 0.0), np.where(pos, d2 / safe_dist, 0.0)],
        axis=-1,
    )
    normal = np.where(box[:, None], box_normal, sph_normal)
    return clear, idx.astype(np.intp), normal


def pair_clearance(centers, radii, pairs):
    b = centers.shape[0]
    if pairs.shape[0] == 0:
        return np.empty((b, 0)), np.empty((b, 0, 3))
    p, q = pairs[:, 0], pairs[:, 1]
    d = centers[:, p, :] - centers[:, q, :]
    d0, d1, d2 = d[..., 0], d[..., 1], d[..., 2]
    dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    clear = dist - (radii[p] + radii[q])
    pos = dist > 0.0
    safe = np.where(pos, dist, 1.0)
    direc = np.stack(
        [np.where(pos, d0 / safe, 1.0), np.where(pos, d1 / safe, 0.0), np.where(pos, d2 / safe, 0.0)], axis=-1
    )
    return clear, direc


def _mm(a, b):
    return (a[..., :, :, None] * b[..., None, :, :]).sum(axis=-2)


def _mv(a, v):
    return (a * v[..., None, :]).sum(axis=-1)


def chain_collision(q, base_rot, base_pos, o_rot, o_pos, o_axis, ok, okk, prismatic,
                    tool_rot, tool_pos, ee_link, sph_link, sph_c, sph_r,
                    obs_rot, obs_pos, obs_kind, obs_dims, pairs, margin, w_coll, want_grad):
    P, D = q.shape
    S = sph_link.shape[0]
    rot = np.broadcast_to(base_rot, (P, 3, 3))
    pos = np.broadcast_to(base_pos, (P, 3))
    lrot = np.empty((P, D, 3, 3))
    lpos = np.empty((P, D, 3))
    jax = np.empty((P, D, 3))
    jpos = np.empty((P, D, 3))
    for i in range(D):
        jp = pos + _mv(rot, o_pos[i])
        ax = _mv(rot, o_axis[i])
        qi = q[:, i, None, None]
        if prismatic[i]:
            local = np.broadcast_to(o_rot[i], (P, 3, 3))
            pos = jp + ax * q[:, i, None]
        else:
            local = o_rot[i] + np.sin(qi) * ok[i] + (1.0 - np.cos(qi)) * okk[i]
            pos = jp
        rot = _mm(rot, local)
        lrot[:, i], lpos[:, i], jax[:, i], jpos[:, i] = rot, pos, ax, jp
    eer = _mm(lrot[:, ee_link], tool_rot)
    eep = lpos[:, ee_link] + _mv(lrot[:, ee_link], tool_pos)
    value = np.zeros(P)
    grad = np.zeros((P, D))
    minw = np.full(P, np.inf)
    mins = np.full(P, np.inf)
    if S == 0:
        return value, grad, minw, mins, eep, eer, jax, jpos
    cen = lpos[:, sph_link] + _mv(lrot[:, sph_link], sph_c)  # (P, S, 3)
    g = np.zeros((P, S, 3))
    if obs_pos.shape[0]:
        c, _, n = world_clearance(cen.reshape(-1, 3), np.tile(sph_r, P), obs_rot, obs_pos, obs_kind, obs_dims)
        c = c.reshape(P, S)
        minw = c.min(axis=1)
        h = np.maximum(margin - c, 0.0)
        value += w_coll * (h * h).sum(axis=1)
        g += (-2.0 * w_coll * h)[..., None] * n.reshape(P, S, 3)
    if pairs.shape[0]:
        c, u = pair_clearance(cen, sph_r, pairs)
        mins = c.min(axis=1)
        h = np.maximum(margin - c, 0.0)
        value += w_coll * (h * h).sum(axis=1)
        gp = (-2.0 * w_coll * h)[..., None] * u
        np.add.at(g, (slice(None), pairs[:, 0]), gp)
        np.add.at(g, (slice(None), pairs[:, 1]), -gp)
    if want_grad:
        onehot = (sph_link[:, None] == np.arange(D)[None, :]).astype(float)  # (S, D)
        gl = (g[:, :, None, :] * onehot[None, :, :, None]).sum(axis=1)
        ml = (np.cross(cen, g)[:, :, None, :] * onehot[None, :, :, None]).sum(axis=1)
        G = np.cumsum(gl[:, ::-1], axis=1)[:, ::-1]
        Mm = np.cumsum(ml[:, ::-1], axis=1)[:, ::-1]
        rev = Mm - np.cross(jpos, G)
        lin = np.where(prismatic.astype(bool)[None, :, None], G, rev)
        grad = (jax * lin).sum(axis=-1)
    return value, grad, minw, mins, eep, eer, jax, jpos
