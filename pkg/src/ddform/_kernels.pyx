# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_kernels_py.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, sqrt, pow, fabs

cnp.import_array()

cdef double BALL_SLACK = 1e-10


def ball_max(dev, lower, double h, x0, radii):
    cdef int d = dev.ndim
    cdef cnp.ndarray[double, ndim=3, mode="c"] v3 = np.ascontiguousarray(
        np.asarray(dev, dtype=np.float64).reshape(dev.shape + (1,) * (3 - d)))
    cdef double[::1] r = np.ascontiguousarray(radii, dtype=np.float64)
    cdef int K = r.shape[0]
    osc_arr = np.zeros(K)
    cnt_arr = np.zeros(K, dtype=np.int64)
    cdef double[::1] osc = osc_arr
    cdef long long[::1] cnt = cnt_arr
    if K == 0:
        return osc_arr, cnt_arr
    cdef double lo[3]
    cdef double c[3]
    cdef int n[3]
    cdef int a[3]
    cdef int b[3]
    cdef double[::1] r2 = np.empty(K)
    cdef int i, k, p, q, s
    cdef double rmax = r[0], dx, dy, dz, dist2, val
    lower_a = np.asarray(lower, dtype=np.float64)
    x0_a = np.asarray(x0, dtype=np.float64)
    for i in range(3):
        n[i] = v3.shape[i]
        if i < d:
            lo[i] = lower_a[i]
            c[i] = x0_a[i]
            a[i] = max(<int>floor((c[i] - rmax - lo[i]) / h) - 1, 0)
            b[i] = min(<int>ceil((c[i] + rmax - lo[i]) / h) + 2, n[i])
        else:
            lo[i] = 0.0
            c[i] = 0.0
            a[i] = 0
            b[i] = 1
        if b[i] <= a[i]:
            return osc_arr, cnt_arr
    for k in range(K):
        r2[k] = r[k] * r[k] * (1 + BALL_SLACK)
    with nogil:
        for p in range(a[0], b[0]):
            dx = lo[0] + h * p - c[0] if d > 0 else 0.0
            for q in range(a[1], b[1]):
                dy = lo[1] + h * q - c[1] if d > 1 else 0.0
                for s in range(a[2], b[2]):
                    dz = lo[2] + h * s - c[2] if d > 2 else 0.0
                    dist2 = dx * dx + dy * dy + dz * dz
                    val = v3[p, q, s]
                    for k in range(K):
                        if dist2 > r2[k]:
                            break
                        cnt[k] += 1
                        if val > osc[k]:
                            osc[k] = val
    return osc_arr, cnt_arr


def holder_quotient_max(values, points, double alpha):
    v_a = np.asarray(values, dtype=np.float64)
    if v_a.ndim == 1:
        v_a = v_a[:, None]
    cdef double[:, ::1] v = np.ascontiguousarray(v_a)
    cdef double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], dim = x.shape[1], nq = v.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double best = 0.0, dist2, dv, diff, qt
    with nogil:
        for i in range(m - 1):
            for j in range(i + 1, m):
                dist2 = 0.0
                for t in range(dim):
                    diff = x[i, t] - x[j, t]
                    dist2 += diff * diff
                if dist2 == 0.0:
                    continue
                dv = 0.0
                for t in range(nq):
                    diff = fabs(v[i, t] - v[j, t])
                    if diff > dv:
                        dv = diff
                qt = dv / pow(sqrt(dist2), alpha)
                if qt > best:
                    best = qt
    return best
