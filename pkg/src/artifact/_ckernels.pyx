# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sphere-vs-primitive distance kernels.

Operation order matches ``_kernels_py`` term for term; build with
``-ffp-contract=off`` so both backends agree bitwise.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, sin, cos, INFINITY

cnp.import_array()


def world_clearance(const double[:, ::1] centers, const double[::1] radii,
                    const double[:, :, ::1] obs_rot, const double[:, ::1] obs_pos,
                    const int[::1] obs_kind, const double[:, ::1] obs_dims):
    cdef Py_ssize_t n = centers.shape[0]
    cdef Py_ssize_t m = obs_pos.shape[0]
    clear_arr = np.full(n, np.inf)
    idx_arr = np.full(n, -1, dtype=np.intp)
    normal_arr = np.zeros((n, 3))
    cdef double[::1] clear = clear_arr
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double[:, ::1] normal = normal_arr
    cdef Py_ssize_t i, j, k, kbest
    cdef double d0, d1, d2, l0, l1, l2, a0, a1, a2, o0, o1, o2, out, inside, sd, c
    cdef double n0, n1, n2, best, dist, s
    with nogil:
        for i in range(n):
            best = INFINITY
            for j in range(m):
                d0 = centers[i, 0] - obs_pos[j, 0]
                d1 = centers[i, 1] - obs_pos[j, 1]
                d2 = centers[i, 2] - obs_pos[j, 2]
                if obs_kind[j] == 0:
                    l0 = obs_rot[j, 0, 0] * d0 + obs_rot[j, 1, 0] * d1 + obs_rot[j, 2, 0] * d2
                    l1 = obs_rot[j, 0, 1] * d0 + obs_rot[j, 1, 1] * d1 + obs_rot[j, 2, 1] * d2
                    l2 = obs_rot[j, 0, 2] * d0 + obs_rot[j, 1, 2] * d1 + obs_rot[j, 2, 2] * d2
                    a0 = fabs(l0) - obs_dims[j, 0]
                    a1 = fabs(l1) - obs_dims[j, 1]
                    a2 = fabs(l2) - obs_dims[j, 2]
                    o0 = a0 if a0 > 0.0 else 0.0
                    o1 = a1 if a1 > 0.0 else 0.0
                    o2 = a2 if a2 > 0.0 else 0.0
                    out = sqrt(o0 * o0 + o1 * o1 + o2 * o2)
                    inside = a0
                    if a1 > inside:
                        inside = a1
                    if a2 > inside:
                        inside = a2
                    if inside > 0.0:
                        inside = 0.0
                    sd = out + inside
                else:
                    dist = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                    sd = dist - obs_dims[j, 0]
                c = sd - radii[i]
                if c < best:
                    best = c
                    idx[i] = j
                    if obs_kind[j] == 0:
                        if out > 0.0:
                            n0 = (o0 if l0 >= 0.0 else -o0) / out
                            n1 = (o1 if l1 >= 0.0 else -o1) / out
                            n2 = (o2 if l2 >= 0.0 else -o2) / out
                        else:
                            kbest = 0
                            if a1 > a0:
                                kbest = 1
                            if a2 > (a1 if kbest == 1 else a0):
                                kbest = 2
                            n0 = 0.0
                            n1 = 0.0
                            n2 = 0.0
                            if kbest == 0:
                                n0 = 1.0 if l0 >= 0.0 else -1.0
                            elif kbest == 1:
                                n1 = 1.0 if l1 >= 0.0 else -1.0
                            else:
                                n2 = 1.0 if l2 >= 0.0 else -1.0
                        normal[i, 0] = obs_rot[j, 0, 0] * n0 + obs_rot[j, 0, 1] * n1 + obs_rot[j, 0, 2] * n2
                        normal[i, 1] = obs_rot[j, 1, 0] * n0 + obs_rot[j, 1, 1] * n1 + obs_rot[j, 1, 2] * n2
                        normal[i, 2] = obs_rot[j, 2, 0] * n0 + obs_rot[j, 2, 1] * n1 + obs_rot[j, 2, 2] * n2
                    else:
                        if dist > 0.0:
                            normal[i, 0] = d0 / dist
                            normal[i, 1] = d1 / dist
                            normal[i, 2] = d2 / dist
                        else:
                            normal[i, 0] = 1.0
                            normal[i, 1] = 0.0
                            normal[i, 2] = 0.0
            clear[i] = best
    return clear_arr, idx_arr, normal_arr


def pair_clearance(const double[:, :, ::1] centers, const double[::1] radii,
                   const Py_ssize_t[:, ::1] pairs):
    cdef Py_ssize_t b = centers.shape[0]
    cdef Py_ssize_t kp = pairs.shape[0]
    clear_arr = np.empty((b, kp))
    dir_arr = np.empty((b, kp, 3))
    cdef double[:, ::1] clear = clear_arr
    cdef double[:, :, ::1] direc = dir_arr
    cdef Py_ssize_t i, k, p, q
    cdef double d0, d1, d2, dist
    with nogil:
        for i in range(b):
            for k in range(kp):
                p = pairs[k, 0]
                q = pairs[k, 1]
                d0 = centers[i, p, 0] - centers[i, q, 0]
                d1 = centers[i, p, 1] - centers[i, q, 1]
                d2 = centers[i, p, 2] - centers[i, q, 2]
                dist = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                clear[i, k] = dist - (radii[p] + radii[q])
                if dist > 0.0:
                    direc[i, k, 0] = d0 / dist
                    direc[i, k, 1] = d1 / dist
                    direc[i, k, 2] = d2 / dist
                else:
                    direc[i, k, 0] = 1.0
                    direc[i, k, 1] = 0.0
                    direc[i, k, 2] = 0.0
    return clear_arr, dir_arr


def chain_collision(const double[:, ::1] q,
                    const double[:, ::1] base_rot, const double[::1] base_pos,
                    const double[:, :, ::1] o_rot, const double[:, ::1] o_pos,
                    const double[:, ::1] o_axis, const double[:, :, ::1] ok,
                    const double[:, :, ::1] okk, const int[::1] prismatic,
                    const double[:, ::1] tool_rot, const double[::1] tool_pos, Py_ssize_t ee_link,
                    const Py_ssize_t[::1] sph_link, const double[:, ::1] sph_c, const double[::1] sph_r,
                    const double[:, :, ::1] obs_rot, const double[:, ::1] obs_pos,
                    const int[::1] obs_kind, const double[:, ::1] obs_dims,
                    const Py_ssize_t[:, ::1] pairs, double margin, double w_coll, bint want_grad):
    """FK + sphere collision hinge cost and joint gradient for a batch of configs.

    Returns (value, grad, min_world, min_self, ee_pos, ee_rot, joint_axis, joint_pos).
    """
    cdef Py_ssize_t P = q.shape[0]
    cdef Py_ssize_t D = q.shape[1]
    cdef Py_ssize_t S = sph_link.shape[0]
    cdef Py_ssize_t M = obs_pos.shape[0]
    cdef Py_ssize_t K = pairs.shape[0]

    value_arr = np.zeros(P)
    grad_arr = np.zeros((P, D))
    minw_arr = np.full(P, np.inf)
    mins_arr = np.full(P, np.inf)
    eep_arr = np.empty((P, 3))
    eer_arr = np.empty((P, 3, 3))
    jax_arr = np.empty((P, D, 3))
    jpos_arr = np.empty((P, D, 3))
    lrot_arr = np.empty((D, 3, 3))
    lpos_arr = np.empty((D, 3))
    cen_arr = np.empty((S, 3))
    gs_arr = np.empty((S, 3))
    gl_arr = np.empty((D, 3))
    ml_arr = np.empty((D, 3))

    cdef double[::1] value = value_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double[::1] minw = minw_arr
    cdef double[::1] mins = mins_arr
    cdef double[:, ::1] eep = eep_arr
    cdef double[:, :, ::1] eer = eer_arr
    cdef double[:, :, ::1] jax = jax_arr
    cdef double[:, :, ::1] jpos = jpos_arr
    cdef double[:, :, ::1] lrot = lrot_arr
    cdef double[:, ::1] lpos = lpos_arr
    cdef double[:, ::1] cen = cen_arr
    cdef double[:, ::1] gs = gs_arr
    cdef double[:, ::1] gl = gl_arr
    cdef double[:, ::1] ml = ml_arr

    cdef Py_ssize_t p, i, a, b, s, j, k, kbest, l
    cdef double rot[3][3]
    cdef double loc[3][3]
    cdef double tmp[3][3]
    cdef double pos[3]
    cdef double sn, cs, qi, acc, best, c, h, coef
    cdef double d0, d1, d2, l0, l1, l2, a0, a1, a2, o0, o1, o2, out, inside, sd, dist
    cdef double n0, n1, n2, bn0, bn1, bn2, s0, s1, s2, gx, gy, gz, val
    cdef double wmin, smin

    with nogil:
        for p in range(P):
            for a in range(3):
                pos[a] = base_pos[a]
                for b in range(3):
                    rot[a][b] = base_rot[a, b]
            for i in range(D):
                for a in range(3):
                    jpos[p, i, a] = pos[a] + (rot[a][0] * o_pos[i, 0] + rot[a][1] * o_pos[i, 1] + rot[a][2] * o_pos[i, 2])
                    jax[p, i, a] = rot[a][0] * o_axis[i, 0] + rot[a][1] * o_axis[i, 1] + rot[a][2] * o_axis[i, 2]
                qi = q[p, i]
                if prismatic[i]:
                    for a in range(3):
                        for b in range(3):
                            loc[a][b] = o_rot[i, a, b]
                        pos[a] = jpos[p, i, a] + jax[p, i, a] * qi
                else:
                    sn = sin(qi)
                    cs = 1.0 - cos(qi)
                    for a in range(3):
                        for b in range(3):
                            loc[a][b] = o_rot[i, a, b] + sn * ok[i, a, b] + cs * okk[i, a, b]
                        pos[a] = jpos[p, i, a]
                for a in range(3):
                    for b in range(3):
                        tmp[a][b] = rot[a][0] * loc[0][b] + rot[a][1] * loc[1][b] + rot[a][2] * loc[2][b]
                for a in range(3):
                    lpos[i, a] = pos[a]
                    for b in range(3):
                        rot[a][b] = tmp[a][b]
                        lrot[i, a, b] = tmp[a][b]
            # end effector
            for a in range(3):
                eep[p, a] = lpos[ee_link, a] + (lrot[ee_link, a, 0] * tool_pos[0] + lrot[ee_link, a, 1] * tool_pos[1]
                                                + lrot[ee_link, a, 2] * tool_pos[2])
                for b in range(3):
                    eer[p, a, b] = (lrot[ee_link, a, 0] * tool_rot[0, b] + lrot[ee_link, a, 1] * tool_rot[1, b]
                                    + lrot[ee_link, a, 2] * tool_rot[2, b])
            if S == 0:
                continue
            for s in range(S):
                l = sph_link[s]
                for a in range(3):
                    cen[s, a] = lpos[l, a] + (lrot[l, a, 0] * sph_c[s, 0] + lrot[l, a, 1] * sph_c[s, 1]
                                              + lrot[l, a, 2] * sph_c[s, 2])
                    gs[s, a] = 0.0
            val = 0.0
            wmin = INFINITY
            smin = INFINITY
            for s in range(S):
                best = INFINITY
                bn0 = 0.0
                bn1 = 0.0
                bn2 = 0.0
                for j in range(M):
                    d0 = cen[s, 0] - obs_pos[j, 0]
                    d1 = cen[s, 1] - obs_pos[j, 1]
                    d2 = cen[s, 2] - obs_pos[j, 2]
                    if obs_kind[j] == 0:
                        l0 = obs_rot[j, 0, 0] * d0 + obs_rot[j, 1, 0] * d1 + obs_rot[j, 2, 0] * d2
                        l1 = obs_rot[j, 0, 1] * d0 + obs_rot[j, 1, 1] * d1 + obs_rot[j, 2, 1] * d2
                        l2 = obs_rot[j, 0, 2] * d0 + obs_rot[j, 1, 2] * d1 + obs_rot[j, 2, 2] * d2
                        a0 = fabs(l0) - obs_dims[j, 0]
                        a1 = fabs(l1) - obs_dims[j, 1]
                        a2 = fabs(l2) - obs_dims[j, 2]
                        o0 = a0 if a0 > 0.0 else 0.0
                        o1 = a1 if a1 > 0.0 else 0.0
                        o2 = a2 if a2 > 0.0 else 0.0
                        out = sqrt(o0 * o0 + o1 * o1 + o2 * o2)
                        inside = a0
                        if a1 > inside:
                            inside = a1
                        if a2 > inside:
                            inside = a2
                        if inside > 0.0:
                            inside = 0.0
                        sd = out + inside
                    else:
                        dist = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                        sd = dist - obs_dims[j, 0]
                    c = sd - sph_r[s]
                    if c < best:
                        best = c
                        if want_grad and margin - c > 0.0:
                            if obs_kind[j] == 0:
                                if out > 0.0:
                                    n0 = (o0 if l0 >= 0.0 else -o0) / out
                                    n1 = (o1 if l1 >= 0.0 else -o1) / out
                                    n2 = (o2 if l2 >= 0.0 else -o2) / out
                                else:
                                    kbest = 0
                                    if a1 > a0:
                                        kbest = 1
                                    if a2 > (a1 if kbest == 1 else a0):
                                        kbest = 2
                                    n0 = 0.0
                                    n1 = 0.0
                                    n2 = 0.0
                                    if kbest == 0:
                                        n0 = 1.0 if l0 >= 0.0 else -1.0
                                    elif kbest == 1:
                                        n1 = 1.0 if l1 >= 0.0 else -1.0
                                    else:
                                        n2 = 1.0 if l2 >= 0.0 else -1.0
                                bn0 = obs_rot[j, 0, 0] * n0 + obs_rot[j, 0, 1] * n1 + obs_rot[j, 0, 2] * n2
                                bn1 = obs_rot[j, 1, 0] * n0 + obs_rot[j, 1, 1] * n1 + obs_rot[j, 1, 2] * n2
                                bn2 = obs_rot[j, 2, 0] * n0 + obs_rot[j, 2, 1] * n1 + obs_rot[j, 2, 2] * n2
                            else:
                                if dist > 0.0:
                                    bn0 = d0 / dist
                                    bn1 = d1 / dist
                                    bn2 = d2 / dist
                                else:
                                    bn0 = 1.0
                                    bn1 = 0.0
                                    bn2 = 0.0
                if best < wmin:
                    wmin = best
                h = margin - best
                if h > 0.0 and M > 0:
                    val = val + w_coll * h * h
                    if want_grad:
                        coef = -2.0 * w_coll * h
                        gs[s, 0] += coef * bn0
                        gs[s, 1] += coef * bn1
                        gs[s, 2] += coef * bn2
            for k in range(K):
                a = pairs[k, 0]
                b = pairs[k, 1]
                d0 = cen[a, 0] - cen[b, 0]
                d1 = cen[a, 1] - cen[b, 1]
                d2 = cen[a, 2] - cen[b, 2]
                dist = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                c = dist - (sph_r[a] + sph_r[b])
                if c < smin:
                    smin = c
                h = margin - c
                if h > 0.0:
                    val = val + w_coll * h * h
                    if want_grad:
                        coef = -2.0 * w_coll * h
                        if dist > 0.0:
                            n0 = d0 / dist
                            n1 = d1 / dist
                            n2 = d2 / dist
                        else:
                            n0 = 1.0
                            n1 = 0.0
                            n2 = 0.0
                        gs[a, 0] += coef * n0
                        gs[a, 1] += coef * n1
                        gs[a, 2] += coef * n2
                        gs[b, 0] -= coef * n0
                        gs[b, 1] -= coef * n1
                        gs[b, 2] -= coef * n2
            value[p] = val
            minw[p] = wmin
            mins[p] = smin
            if not want_grad:
                continue
            for i in range(D):
                for a in range(3):
                    gl[i, a] = 0.0
                    ml[i, a] = 0.0
            for s in range(S):
                l = sph_link[s]
                gx = gs[s, 0]
                gy = gs[s, 1]
                gz = gs[s, 2]
                gl[l, 0] += gx
                gl[l, 1] += gy
                gl[l, 2] += gz
                ml[l, 0] += cen[s, 1] * gz - cen[s, 2] * gy
                ml[l, 1] += cen[s, 2] * gx - cen[s, 0] * gz
                ml[l, 2] += cen[s, 0] * gy - cen[s, 1] * gx
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            n0 = 0.0
            n1 = 0.0
            n2 = 0.0
            for i in range(D - 1, -1, -1):
                s0 += gl[i, 0]
                s1 += gl[i, 1]
                s2 += gl[i, 2]
                n0 += ml[i, 0]
                n1 += ml[i, 1]
                n2 += ml[i, 2]
                if prismatic[i]:
                    acc = jax[p, i, 0] * s0 + jax[p, i, 1] * s1 + jax[p, i, 2] * s2
                else:
                    gx = n0 - (jpos[p, i, 1] * s2 - jpos[p, i, 2] * s1)
                    gy = n1 - (jpos[p, i, 2] * s0 - jpos[p, i, 0] * s2)
                    gz = n2 - (jpos[p, i, 0] * s1 - jpos[p, i, 1] * s0)
                    acc = jax[p, i, 0] * gx + jax[p, i, 1] * gy + jax[p, i, 2] * gz
                grad[p, i] = acc
    return value_arr, grad_arr, minw_arr, mins_arr, eep_arr, eer_arr, jax_arr, jpos_arr
