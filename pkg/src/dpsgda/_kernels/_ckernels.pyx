# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_pykernels``."""

from libc.math cimport sqrt, isfinite

cdef double MEMBERSHIP_RTOL = 1e-12


cdef void _project(int kind, double radius, const double[::1] center, const double[::1] lower,
                   const double[::1] upper, double[::1] p) noexcept nogil:
    cdef Py_ssize_t i, d = p.shape[0]
    cdef double norm = 0.0, diff, scale
    if kind == 1:
        for i in range(d):
            diff = p[i] - center[i]
            norm += diff * diff
        norm = sqrt(norm)
        if norm > radius * (1.0 + MEMBERSHIP_RTOL):
            scale = radius / norm
            for i in range(d):
                p[i] = center[i] + (p[i] - center[i]) * scale
    elif kind == 2:
        for i in range(d):
            if p[i] < lower[i]:
                p[i] = lower[i]
            elif p[i] > upper[i]:
                p[i] = upper[i]


def quadgame_block(const double[:, :, ::1] K, const double[:, ::1] b, const double[:, ::1] c,
                   double mu, double rho, tuple dom_w, tuple dom_v,
                   double[::1] w, double[::1] v, double[::1] wsum, double[::1] vsum,
                   const long[:, ::1] idx, const double[:, ::1] xi, const double[:, ::1] zeta,
                   const double[::1] eta_w, const double[::1] eta_v):
    cdef Py_ssize_t steps = idx.shape[0], m = idx.shape[1]
    cdef Py_ssize_t d1 = w.shape[0], d2 = v.shape[0]
    cdef Py_ssize_t t, j, i, k, e
    cdef double inv_m = 1.0 / m, acc
    cdef int kw = dom_w[0], kv = dom_v[0]
    cdef double rw = dom_w[1], rv = dom_v[1]
    cdef const double[::1] cw = dom_w[2], lw = dom_w[3], uw = dom_w[4]
    cdef const double[::1] cv = dom_v[2], lv = dom_v[3], uv = dom_v[4]
    import numpy as np
    cdef double[::1] gw = np.zeros(d1)
    cdef double[::1] gv = np.zeros(d2)
    cdef double[::1] wn = np.zeros(d1)
    cdef double[::1] vn = np.zeros(d2)
    cdef int bad = -1
    with nogil:
        for t in range(steps):
            for i in range(d1):
                gw[i] = 0.0
            for k in range(d2):
                gv[k] = 0.0
            for j in range(m):
                e = idx[t, j]
                for i in range(d1):
                    acc = 0.0
                    for k in range(d2):
                        acc = acc + K[e, i, k] * v[k]
                        gv[k] = gv[k] + K[e, i, k] * w[i]
                    gw[i] = gw[i] + acc + b[e, i]
                for k in range(d2):
                    gv[k] = gv[k] - c[e, k]
            for i in range(d1):
                wn[i] = w[i] - eta_w[t] * (gw[i] * inv_m + mu * w[i] + xi[t, i])
            for k in range(d2):
                vn[k] = v[k] + eta_v[t] * (gv[k] * inv_m - rho * v[k] + zeta[t, k])
            _project(kw, rw, cw, lw, uw, wn)
            _project(kv, rv, cv, lv, uv, vn)
            for i in range(d1):
                w[i] = wn[i]
                if not isfinite(wn[i]):
                    bad = t
            for k in range(d2):
                v[k] = vn[k]
                if not isfinite(vn[k]):
                    bad = t
            if bad >= 0:
                break
            for i in range(d1):
                wsum[i] = wsum[i] + w[i]
            for k in range(d2):
                vsum[k] = vsum[k] + v[k]
    return bad


def auc_pair_counts(pos, neg):
    import numpy as np
    cdef const double[::1] p = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(neg, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef long long greater = 0, ties = 0
    cdef long long g, t
    cdef double x
    with nogil:
        for i in range(p.shape[0]):
            x = p[i]
            g = 0
            t = 0
            # branch-free so the inner loop vectorises
            for j in range(q.shape[0]):
                g += x > q[j]
                t += x == q[j]
            greater += g
            ties += t
    return int(greater), int(ties)
