# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray-cast kernels; same contracts as kernels.numpy_backend."""

from libc.math cimport INFINITY, fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double EPS = 1e-12


def raycast_sphere(const double[:, ::1] origins, const double[::1] direction,
                   const double[::1] center, double radius, double dmin):
    cdef Py_ssize_t n = origins.shape[0]
    t_np = np.full(n, np.inf)
    nrm_np = np.zeros((n, 3))
    inside_np = np.zeros(n, dtype=np.uint8)
    cdef double[::1] t = t_np
    cdef double[:, ::1] nrm = nrm_np
    cdef unsigned char[::1] inside = inside_np
    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef double cx = center[0], cy = center[1], cz = center[2]
    cdef double vx, vy, vz, b, c0, disc, sq, t0, t1
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            vx = origins[i, 0] - cx
            vy = origins[i, 1] - cy
            vz = origins[i, 2] - cz
            b = vx * dx + vy * dy + vz * dz
            c0 = vx * vx + vy * vy + vz * vz - radius * radius
            disc = b * b - c0
            if disc < 0.0:
                continue
            sq = sqrt(disc)
            t0 = -b - sq
            t1 = -b + sq
            if t0 < dmin:
                if dmin < t1:
                    inside[i] = 1
                continue
            t[i] = t0
            nrm[i, 0] = (origins[i, 0] + t0 * dx - cx) / radius
            nrm[i, 1] = (origins[i, 1] + t0 * dy - cy) / radius
            nrm[i, 2] = (origins[i, 2] + t0 * dz - cz) / radius
    return t_np, nrm_np, inside_np.view(np.bool_)


def raycast_cylinder(const double[:, ::1] origins, const double[::1] direction, const double[::1] center,
                     const double[::1] axis, double radius, double half_length, double dmin):
    cdef Py_ssize_t n = origins.shape[0]
    t_np = np.full(n, np.inf)
    nrm_np = np.zeros((n, 3))
    inside_np = np.zeros(n, dtype=np.uint8)
    cdef double[::1] t = t_np
    cdef double[:, ::1] nrm = nrm_np
    cdef unsigned char[::1] inside = inside_np

    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef double cx = center[0], cy = center[1], cz = center[2]
    cdef double wx = axis[0], wy = axis[1], wz = axis[2]
    cdef double wn = sqrt(wx * wx + wy * wy + wz * wz)
    wx /= wn; wy /= wn; wz /= wn
    cdef double dp = dx * wx + dy * wy + dz * wz
    cdef double dpx = dx - dp * wx, dpy = dy - dp * wy, dpz = dz - dp * wz
    cdef double a = dpx * dpx + dpy * dpy + dpz * dpz
    cdef bint axis_parallel = a <= EPS
    cdef bint slab_parallel = fabs(dp) <= EPS

    cdef double ox, oy, oz, op, opx, opy, opz, b, c0, disc, sq
    cdef double lat0, lat1, sl0, sl1, ta, tb, t0, t1, qx, qy, qz, qn, s, sgn
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ox = origins[i, 0] - cx
            oy = origins[i, 1] - cy
            oz = origins[i, 2] - cz
            op = ox * wx + oy * wy + oz * wz
            opx = ox - op * wx
            opy = oy - op * wy
            opz = oz - op * wz
            if not axis_parallel:
                b = opx * dpx + opy * dpy + opz * dpz
                c0 = opx * opx + opy * opy + opz * opz - radius * radius
                disc = b * b - a * c0
                if disc < 0.0:
                    continue
                sq = sqrt(disc)
                lat0 = (-b - sq) / a
                lat1 = (-b + sq) / a
            else:
                if opx * opx + opy * opy + opz * opz <= radius * radius:
                    lat0 = -INFINITY
                    lat1 = INFINITY
                else:
                    continue
            if not slab_parallel:
                ta = (-half_length - op) / dp
                tb = (half_length - op) / dp
                if ta <= tb:
                    sl0 = ta; sl1 = tb
                else:
                    sl0 = tb; sl1 = ta
            else:
                if fabs(op) <= half_length:
                    sl0 = -INFINITY
                    sl1 = INFINITY
                else:
                    continue
            t0 = lat0 if lat0 >= sl0 else sl0
            t1 = lat1 if lat1 <= sl1 else sl1
            if t0 > t1:
                continue
            if t0 < dmin:
                if dmin < t1:
                    inside[i] = 1
                continue
            if t0 == INFINITY:
                continue
            t[i] = t0
            if lat0 >= sl0:  # lateral surface is the active constraint at entry
                qx = opx + t0 * dpx
                qy = opy + t0 * dpy
                qz = opz + t0 * dpz
                qn = sqrt(qx * qx + qy * qy + qz * qz)
                if qn <= EPS:
                    qn = 1.0
                nrm[i, 0] = qx / qn
                nrm[i, 1] = qy / qn
                nrm[i, 2] = qz / qn
            else:
                s = op + t0 * dp
                sgn = -1.0 if s < 0.0 else 1.0
                nrm[i, 0] = sgn * wx
                nrm[i, 1] = sgn * wy
                nrm[i, 2] = sgn * wz
    return t_np, nrm_np, inside_np.view(np.bool_)


def raycast_mesh(const double[:, ::1] origins, const double[::1] direction,
                 const double[:, ::1] v0, const double[:, ::1] e1, const double[:, ::1] e2,
                 const double[:, ::1] fnorm,
                 const double[:, ::1] bmin, const double[:, ::1] bmax,
                 const int[::1] left, const int[::1] right, const int[::1] nstart, const int[::1] ncount,
                 double dmin):
    cdef Py_ssize_t n = origins.shape[0]
    t_np = np.full(n, np.inf)
    nrm_np = np.zeros((n, 3))
    inside_np = np.zeros(n, dtype=np.uint8)
    cdef double[::1] t = t_np
    cdef double[:, ::1] nrm = nrm_np
    cdef unsigned char[::1] inside = inside_np

    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    # per-triangle pvec = cross(direction, e2) and det = e1 . pvec
    pv_np = np.cross(np.asarray(direction), np.asarray(e2))
    det_np = np.einsum("ij,ij->i", np.asarray(e1), pv_np)
    cdef double[:, ::1] pv = np.ascontiguousarray(pv_np)
    cdef double[::1] det = np.ascontiguousarray(det_np)

    cdef double invx = 0.0, invy = 0.0, invz = 0.0
    cdef bint usex = fabs(dx) > 1e-15, usey = fabs(dy) > 1e-15, usez = fabs(dz) > 1e-15
    if usex: invx = 1.0 / dx
    if usey: invy = 1.0 / dy
    if usez: invz = 1.0 / dz

    cdef int stack[128]
    cdef int sp, node, f, f_end, best_tri
    cdef double ox, oy, oz, best_front, best_any
    cdef bint any_back
    cdef double t_lo, t_hi, ta, tb, tmp
    cdef double dd, tvx, tvy, tvz, u, qx, qy, qz, vv, tt
    cdef Py_ssize_t i

    with nogil:
        for i in range(n):
            ox = origins[i, 0]
            oy = origins[i, 1]
            oz = origins[i, 2]
            best_front = INFINITY
            best_any = INFINITY
            best_tri = -1
            any_back = 0
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                # slab test against [dmin, best_front]
                t_lo = dmin
                t_hi = best_front
                if usex:
                    ta = (bmin[node, 0] - ox) * invx
                    tb = (bmax[node, 0] - ox) * invx
                    if ta > tb:
                        tmp = ta; ta = tb; tb = tmp
                    if ta > t_lo: t_lo = ta
                    if tb < t_hi: t_hi = tb
                elif ox < bmin[node, 0] or ox > bmax[node, 0]:
                    continue
                if usey:
                    ta = (bmin[node, 1] - oy) * invy
                    tb = (bmax[node, 1] - oy) * invy
                    if ta > tb:
                        tmp = ta; ta = tb; tb = tmp
                    if ta > t_lo: t_lo = ta
                    if tb < t_hi: t_hi = tb
                elif oy < bmin[node, 1] or oy > bmax[node, 1]:
                    continue
                if usez:
                    ta = (bmin[node, 2] - oz) * invz
                    tb = (bmax[node, 2] - oz) * invz
                    if ta > tb:
                        tmp = ta; ta = tb; tb = tmp
                    if ta > t_lo: t_lo = ta
                    if tb < t_hi: t_hi = tb
                elif oz < bmin[node, 2] or oz > bmax[node, 2]:
                    continue
                if t_lo > t_hi:
                    continue
                if ncount[node] > 0:
                    f_end = nstart[node] + ncount[node]
                    for f in range(nstart[node], f_end):
                        dd = det[f]
                        if fabs(dd) <= EPS:
                            continue
                        tvx = ox - v0[f, 0]
                        tvy = oy - v0[f, 1]
                        tvz = oz - v0[f, 2]
                        u = (tvx * pv[f, 0] + tvy * pv[f, 1] + tvz * pv[f, 2]) / dd
                        if u < 0.0 or u > 1.0:
                            continue
                        qx = tvy * e1[f, 2] - tvz * e1[f, 1]
                        qy = tvz * e1[f, 0] - tvx * e1[f, 2]
                        qz = tvx * e1[f, 1] - tvy * e1[f, 0]
                        vv = (dx * qx + dy * qy + dz * qz) / dd
                        if vv < 0.0 or u + vv > 1.0:
                            continue
                        tt = (e2[f, 0] * qx + e2[f, 1] * qy + e2[f, 2] * qz) / dd
                        if tt < dmin:
                            continue
                        if tt < best_any:
                            best_any = tt
                            any_back = dd < 0.0
                        if dd > 0.0 and tt < best_front:
                            best_front = tt
                            best_tri = f
                else:
                    stack[sp] = left[node]
                    sp += 1
                    stack[sp] = right[node]
                    sp += 1
            if any_back and best_any < INFINITY:
                inside[i] = 1
            if best_tri >= 0:
                t[i] = best_front
                nrm[i, 0] = fnorm[best_tri, 0]
                nrm[i, 1] = fnorm[best_tri, 1]
                nrm[i, 2] = fnorm[best_tri, 2]
    return t_np, nrm_np, inside_np.view(np.bool_)


def sphere_press_response(const double[:, ::1] positions, const double[:, ::1] normals,
                          const double[::1] areas, const int[::1] taxel_index,
                          int n_taxels, const double[::1] center,
                          const double[::1] direction, double radius,
                          double force, double elasticity,
                          double step, double refine, double cap):
    """Fused sphere press: ray cast, force-equilibrium line search, taxel sums.

    Mirrors cast_rays + solve_max_penetration + unscaled_taxel_forces for a
    sphere indenter (the calibration hot path).  Returns (U, eps_max, status)
    with status 0 = ok, 1 = no ray hits, 2 = force unreachable.
    """
    cdef Py_ssize_t n = positions.shape[0]
    u_np = np.zeros(n_taxels)
    cdef double[::1] u = u_np
    cdef double dx = direction[0], dy = direction[1], dz = direction[2]
    cdef double cx = center[0], cy = center[1], cz = center[2]

    t_buf_np = np.empty(n)
    pt_buf_np = np.empty(n)
    ps_buf_np = np.empty(n)
    a_buf_np = np.empty(n)
    x_buf_np = np.empty(n, dtype=np.int32)
    cdef double[::1] t_buf = t_buf_np
    cdef double[::1] pt_buf = pt_buf_np
    cdef double[::1] ps_buf = ps_buf_np
    cdef double[::1] a_buf = a_buf_np
    cdef int[::1] x_buf = x_buf_np

    cdef Py_ssize_t i, h = 0
    cdef double vx, vy, vz, b, c0, disc, sq, t0, projt, tmin = INFINITY
    with nogil:
        for i in range(n):
            vx = positions[i, 0] - cx
            vy = positions[i, 1] - cy
            vz = positions[i, 2] - cz
            b = vx * dx + vy * dy + vz * dz
            c0 = vx * vx + vy * vy + vz * vz - radius * radius
            disc = b * b - c0
            if disc < 0.0:
                continue
            sq = sqrt(disc)
            t0 = -b - sq
            if t0 < tmin:
                tmin = t0
            projt = normals[i, 0] * dx + normals[i, 1] * dy + normals[i, 2] * dz
            if projt <= 0.0:
                continue
            t_buf[h] = t0
            pt_buf[h] = projt
            ps_buf[h] = sq / radius  # -(n_s . n_c) at the entering hit
            a_buf[h] = areas[i]
            x_buf[h] = taxel_index[i]
            h += 1
    if h == 0 and tmin == INFINITY:
        return u_np, 0.0, 1
    if force <= 0.0:
        return u_np, 0.0, 0

    # force curve over penetrated points: prefix sums in depth order
    rel_np = t_buf_np[:h] - tmin
    order = np.argsort(rel_np, kind="stable")
    rel_s_np = np.ascontiguousarray(rel_np[order])
    w_s_np = np.ascontiguousarray((a_buf_np[:h] * pt_buf_np[:h])[order])
    cdef double[::1] rel_s = rel_s_np
    cdef double[::1] w_s = w_s_np
    cdef double conv = 1e-3 * elasticity

    cumw_np = np.concatenate([[0.0], np.cumsum(w_s_np)])
    cumrw_np = np.concatenate([[0.0], np.cumsum(rel_s_np * w_s_np)])
    cdef double[::1] cumw = cumw_np
    cdef double[::1] cumrw = cumrw_np

    def _force(double eps):
        cdef Py_ssize_t k = int(np.searchsorted(rel_s_np, eps, side="left"))
        return conv * (eps * cumw[k] - cumrw[k])

    if _force(cap) < force:
        return u_np, 0.0, 2
    cdef double lo = 0.0, hi = step, mid
    while _force(hi) < force:
        lo = hi
        hi = hi + step if hi + step < cap else cap
    while hi - lo > refine:
        mid = 0.5 * (lo + hi)
        if _force(mid) >= force:
            hi = mid
        else:
            lo = mid
    cdef double eps_max = hi

    cdef double eps_i
    cdef Py_ssize_t j
    with nogil:
        for i in range(h):
            eps_i = eps_max - (t_buf[i] - tmin)
            if eps_i <= 0.0:
                continue
            j = x_buf[i]
            if j < 0:
                continue
            u[j] += conv * eps_i * a_buf[i] * pt_buf[i] * ps_buf[i]
    return u_np, eps_max, 0
