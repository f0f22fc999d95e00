# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Pure-Python twins live in ``_fallback.py``."""
import numpy as np

from libc.math cimport ceil, fabs
from libc.stdlib cimport free, malloc

cdef long BOUNDARY = -1
cdef double DUP_TOL = 1e-14


cdef inline double _clampd(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def euler_maruyama(x0, drift, double sqrt_omega, double dt, dB):
    cdef const double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(drift, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(dB, dtype=np.float64)
    cdef Py_ssize_t n_paths = bv.shape[0], n_steps = bv.shape[1], p, k
    out = np.empty((n_paths, n_steps + 1))
    cdef double[:, ::1] o = out
    cdef double x
    with nogil:
        for p in range(n_paths):
            x = x0v[p]
            o[p, 0] = x
            for k in range(n_steps):
                x = x * ((1.0 - dv[k] * dt) + sqrt_omega * bv[p, k])
                o[p, k + 1] = x
    return out


cdef Py_ssize_t _clip(double* px, double* py, long* pl, Py_ssize_t n,
                      double nx, double ny, double c, long label,
                      double* ox, double* oy, long* ol) nogil:
    cdef Py_ssize_t k, k2, m = 0
    cdef double sa, sb, t
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        sa = nx * px[k] + ny * py[k] - c
        sb = nx * px[k2] + ny * py[k2] - c
        if sa <= 0.0:
            ox[m] = px[k]
            oy[m] = py[k]
            ol[m] = pl[k]
            m += 1
            if sb > 0.0:
                t = sa / (sa - sb)
                ox[m] = px[k] + t * (px[k2] - px[k])
                oy[m] = py[k] + t * (py[k2] - py[k])
                ol[m] = label
                m += 1
        elif sb <= 0.0:
            t = sa / (sa - sb)
            ox[m] = px[k] + t * (px[k2] - px[k])
            oy[m] = py[k] + t * (py[k2] - py[k])
            ol[m] = pl[k]
            m += 1
    return m


def clip_cells(sites, indptr, indices):
    cdef const double[:, ::1] s = np.ascontiguousarray(sites, dtype=np.float64)
    cdef const long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0], i, jj, k, k2, m, total = 0, cap, maxdeg = 0
    for i in range(n):
        if ip[i + 1] - ip[i] > maxdeg:
            maxdeg = ip[i + 1] - ip[i]
        total += 4 + (ip[i + 1] - ip[i])
    cap = 4 + maxdeg + 1
    ptr = np.zeros(n + 1, dtype=np.int64)
    verts = np.empty((total, 2))
    src = np.empty(total, dtype=np.int64)
    cdef long[::1] pv = ptr
    cdef double[:, ::1] vv = verts
    cdef long[::1] sv = src
    cdef double* ax = <double*> malloc(cap * sizeof(double))
    cdef double* ay = <double*> malloc(cap * sizeof(double))
    cdef long* al = <long*> malloc(cap * sizeof(long))
    cdef double* bx = <double*> malloc(cap * sizeof(double))
    cdef double* by = <double*> malloc(cap * sizeof(double))
    cdef long* bl = <long*> malloc(cap * sizeof(long))
    cdef double* tx
    cdef double* ty
    cdef long* tl
    cdef double xi, yi, xj, yj, nx, ny, c
    cdef long j
    cdef Py_ssize_t out = 0
    try:
        with nogil:
            for i in range(n):
                xi = s[i, 0]
                yi = s[i, 1]
                ax[0] = 0.0; ay[0] = 0.0
                ax[1] = 1.0; ay[1] = 0.0
                ax[2] = 1.0; ay[2] = 1.0
                ax[3] = 0.0; ay[3] = 1.0
                for k in range(4):
                    al[k] = BOUNDARY
                m = 4
                for jj in range(ip[i], ip[i + 1]):
                    j = ix[jj]
                    if j == i:
                        continue
                    xj = s[j, 0]
                    yj = s[j, 1]
                    nx = xj - xi
                    ny = yj - yi
                    c = nx * (0.5 * (xi + xj)) + ny * (0.5 * (yi + yj))
                    m = _clip(ax, ay, al, m, nx, ny, c, j, bx, by, bl)
                    tx = ax; ax = bx; bx = tx
                    ty = ay; ay = by; by = ty
                    tl = al; al = bl; bl = tl
                    if m == 0:
                        break
                # drop a vertex that coincides with its successor
                k2 = out
                for k in range(m):
                    if m < 2 or fabs(ax[k] - ax[(k + 1) % m]) + fabs(ay[k] - ay[(k + 1) % m]) > DUP_TOL:
                        vv[out, 0] = ax[k]
                        vv[out, 1] = ay[k]
                        sv[out] = al[k]
                        out += 1
                if out == k2 and m > 0:
                    vv[out, 0] = ax[0]
                    vv[out, 1] = ay[0]
                    sv[out] = al[0]
                    out += 1
                pv[i + 1] = out
    finally:
        free(ax); free(ay); free(al); free(bx); free(by); free(bl)
    return ptr, verts[:out].copy(), src[:out].copy()


def rasterize(verts, ptr, int resolution):
    cdef const double[:, ::1] v = np.ascontiguousarray(verts, dtype=np.float64).reshape(-1, 2)
    cdef const long[::1] pp = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef Py_ssize_t n = resolution, npoly = pp.shape[0] - 1
    diff_arr = np.zeros((n, n + 1), dtype=np.int32)
    cdef int[:, ::1] diff = diff_arr
    cdef Py_ssize_t q, a, b, cnt, r, rlo, rhi, pmin, pmax, e, ncross, u, w
    cdef double x0, y0, x1, y1, ylo, yhi, yr, xc, tmp
    cdef long col, tcol
    cdef long* cols = NULL
    cdef Py_ssize_t capacity = 0
    try:
        for q in range(npoly):
            cnt = pp[q + 1] - pp[q]
            if cnt < 3:
                continue
            if cnt > capacity:
                free(cols)
                capacity = cnt
                cols = <long*> malloc(capacity * sizeof(long))
            with nogil:
                pmin = n
                pmax = 0
                for e in range(cnt):
                    a = pp[q] + e
                    b = pp[q] + e + 1 if e + 1 < cnt else pp[q]
                    ylo = v[a, 1] if v[a, 1] < v[b, 1] else v[b, 1]
                    yhi = v[b, 1] if v[a, 1] < v[b, 1] else v[a, 1]
                    rlo = <Py_ssize_t> _clampd(ceil(ylo * n - 0.5), 0, n)
                    rhi = <Py_ssize_t> _clampd(ceil(yhi * n - 0.5), 0, n)
                    if rlo < rhi:
                        if rlo < pmin:
                            pmin = rlo
                        if rhi > pmax:
                            pmax = rhi
                for r in range(pmin, pmax):
                    yr = (r + 0.5) / n
                    ncross = 0
                    for e in range(cnt):
                        a = pp[q] + e
                        b = pp[q] + e + 1 if e + 1 < cnt else pp[q]
                        x0 = v[a, 0]; y0 = v[a, 1]
                        x1 = v[b, 0]; y1 = v[b, 1]
                        ylo = y0 if y0 < y1 else y1
                        yhi = y1 if y0 < y1 else y0
                        rlo = <Py_ssize_t> _clampd(ceil(ylo * n - 0.5), 0, n)
                        rhi = <Py_ssize_t> _clampd(ceil(yhi * n - 0.5), 0, n)
                        if rlo <= r < rhi:
                            xc = x0 + (yr - y0) * (x1 - x0) / (y1 - y0)
                            cols[ncross] = <long> _clampd(ceil(xc * n - 0.5), 0, n)
                            ncross += 1
                    # insertion sort; ncross is tiny
                    for u in range(1, ncross):
                        tcol = cols[u]
                        w = u - 1
                        while w >= 0 and cols[w] > tcol:
                            cols[w + 1] = cols[w]
                            w -= 1
                        cols[w + 1] = tcol
                    u = 0
                    while u + 1 < ncross:
                        diff[r, cols[u]] += 1
                        diff[r, cols[u + 1]] -= 1
                        u += 2
    finally:
        free(cols)
    return np.cumsum(diff_arr, axis=1)[:, :n] > 0
