"""Pure-numpy ray-cast kernels (fallback when the compiled extension is absent).

All kernels share the same contract: rays start at the given origins and run
along one common direction.  Hit parameters t are measured from the origins
themselves; a hit is accepted when t >= dmin (the caller passes dmin = -D for
ray starts shifted by D against the direction).  Keeping t independent of D
makes downstream penetration profiles bit-identical for any valid shift.

Each kernel returns (t_enter, normals, inside):
  t_enter: (N,) first front-face hit parameter, +inf on miss,
  normals: (N, 3) outward surface normal at the hit, zero rows on miss,
  inside:  (N,) True where the shifted start point lies inside the solid.
"""

import numpy as np

_EPS = 1e-12


def raycast_sphere(origins, direction, center, radius, dmin):
    o = np.asarray(origins, dtype=float)
    d = np.asarray(direction, dtype=float)
    v = o - np.asarray(center, dtype=float)
    b = v @ d
    c0 = np.einsum("ij,ij->i", v, v) - radius * radius
    disc = b * b - c0
    real = disc >= 0.0
    sq = np.sqrt(np.where(real, disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    inside = real & (t0 < dmin) & (dmin < t1)
    hit = real & (t0 >= dmin)
    t_enter = np.where(hit, t0, np.inf)
    normals = np.zeros_like(o)
    if hit.any():
        pts = o[hit] + t_enter[hit, None] * d
        normals[hit] = (pts - center) / radius
    return t_enter, normals, inside


def raycast_cylinder(origins, direction, center, axis, radius, half_length, dmin):
    o = np.asarray(origins, dtype=float) - np.asarray(center, dtype=float)
    d = np.asarray(direction, dtype=float)
    w = np.asarray(axis, dtype=float)
    w = w / np.linalg.norm(w)
    op = o @ w
    dp = float(d @ w)
    o_perp = o - op[:, None] * w
    d_perp = d - dp * w
    a = float(d_perp @ d_perp)
    n = o.shape[0]

    # intersection interval with the infinite lateral surface
    if a > _EPS:
        b = o_perp @ d_perp
        c0 = np.einsum("ij,ij->i", o_perp, o_perp) - radius * radius
        disc = b * b - a * c0
        real = disc >= 0.0
        sq = np.sqrt(np.where(real, disc, 0.0))
        lat0 = np.where(real, (-b - sq) / a, np.inf)
        lat1 = np.where(real, (-b + sq) / a, -np.inf)
    else:  # ray parallel to the axis
        inside_lat = np.einsum("ij,ij->i", o_perp, o_perp) <= radius * radius
        lat0 = np.where(inside_lat, -np.inf, np.inf)
        lat1 = np.where(inside_lat, np.inf, -np.inf)

    # intersection interval with the slab between the two cap planes
    if abs(dp) > _EPS:
        ta = (-half_length - op) / dp
        tb = (half_length - op) / dp
        sl0 = np.minimum(ta, tb)
        sl1 = np.maximum(ta, tb)
    else:
        inside_slab = np.abs(op) <= half_length
        sl0 = np.where(inside_slab, -np.inf, np.inf)
        sl1 = np.where(inside_slab, np.inf, -np.inf)

    t0 = np.maximum(lat0, sl0)
    t1 = np.minimum(lat1, sl1)
    valid = t0 <= t1
    inside = valid & (t0 < dmin) & (dmin < t1)
    hit = valid & (t0 >= dmin) & np.isfinite(t0)
    t_enter = np.where(hit, t0, np.inf)

    normals = np.zeros_like(o)
    if hit.any():
        th = t_enter[hit]
        lateral = lat0[hit] >= sl0[hit]  # which constraint is active at entry
        q = o_perp[hit] + th[:, None] * d_perp
        nrm = np.empty((th.size, 3))
        qn = np.linalg.norm(q, axis=1)
        qn = np.where(qn > _EPS, qn, 1.0)
        nrm[lateral] = (q / qn[:, None])[lateral]
        cap_sign = np.sign(op[hit] + th * dp)
        cap_sign = np.where(cap_sign == 0.0, 1.0, cap_sign)
        nrm[~lateral] = (cap_sign[:, None] * w)[~lateral]
        normals[hit] = nrm
    return t_enter, normals, inside


def raycast_mesh(origins, direction, v0, e1, e2, face_normals,
                 bvh_bmin, bvh_bmax, bvh_left, bvh_right, bvh_start, bvh_count,
                 dmin, ray_chunk=4096, tri_chunk=128):
    """Brute-force Moller-Trumbore over all triangles (BVH arrays unused here).

    The nearest any-facing hit decides insideness: a watertight mesh with
    outward normals is first left, not entered, only when the start point is
    interior.  The nearest front-face hit defines t_enter.
    """
    o_all = np.asarray(origins, dtype=float)
    d = np.asarray(direction, dtype=float)
    n = o_all.shape[0]
    nf = v0.shape[0]

    best_front = np.full(n, np.inf)
    best_front_tri = np.full(n, -1, dtype=np.int64)
    best_any = np.full(n, np.inf)
    best_any_back = np.zeros(n, dtype=bool)

    pvec = np.cross(d, e2)  # (F, 3)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok_det = np.abs(det) > _EPS
    front_tri = det > 0.0  # det = -(d . face normal) up to scale

    for r0 in range(0, n, ray_chunk):
        r1 = min(r0 + ray_chunk, n)
        o = o_all[r0:r1]
        for f0 in range(0, nf, tri_chunk):
            f1 = min(f0 + tri_chunk, nf)
            dd = det[f0:f1]
            with np.errstate(divide="ignore", invalid="ignore"):
                tvec = o[:, None, :] - v0[None, f0:f1, :]
                u = np.einsum("rfk,fk->rf", tvec, pvec[f0:f1]) / dd
                qvec = np.cross(tvec, e1[None, f0:f1, :])
                v = qvec @ d / dd
                t = np.einsum("rfk,fk->rf", qvec, e2[f0:f1]) / dd
                valid = (
                    ok_det[None, f0:f1]
                    & (u >= 0.0) & (u <= 1.0)
                    & (v >= 0.0) & (u + v <= 1.0)
                    & (t >= dmin)
                )
            t = np.where(valid, t, np.inf)

            # nearest hit of any facing in this chunk
            k_any = np.argmin(t, axis=1)
            t_any = t[np.arange(t.shape[0]), k_any]
            better = t_any < best_any[r0:r1]
            idx = np.flatnonzero(better) + r0
            best_any[idx] = t_any[better]
            best_any_back[idx] = ~front_tri[f0 + k_any[better]]

            # nearest front-face hit in this chunk
            t_front = np.where(front_tri[None, f0:f1], t, np.inf)
            k_fr = np.argmin(t_front, axis=1)
            t_fr = t_front[np.arange(t_front.shape[0]), k_fr]
            better = t_fr < best_front[r0:r1]
            idx = np.flatnonzero(better) + r0
            best_front[idx] = t_fr[better]
            best_front_tri[idx] = f0 + k_fr[better]

    inside = np.isfinite(best_any) & best_any_back & (best_any > dmin)
    hit = np.isfinite(best_front)
    t_enter = np.where(hit, best_front, np.inf)
    normals = np.zeros_like(o_all)
    if hit.any():
        normals[hit] = face_normals[best_front_tri[hit]]
    return t_enter, normals, inside
