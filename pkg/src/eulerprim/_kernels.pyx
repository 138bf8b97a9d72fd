# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled germ-jet and characteristic-function loops."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, pow, sqrt, ceil, floor, sin, cos

cnp.import_array()

NAME = "cython"


cdef inline void _jets(const double* row, double dx, double dy, double* out) noexcept nogil:
    cdef double m = row[2], a11 = row[3], a12 = row[4], a22 = row[5]
    cdef int kind = <int>row[6]
    cdef double beta = row[7]
    cdef double ax = a11 * dx + a12 * dy
    cdef double ay = a12 * dx + a22 * dy
    cdef double q = dx * ax + dy * ay
    cdef double G, G1, G2, b
    if kind == 0:
        G = exp(-q)
        G1 = -G
        G2 = G
    else:
        b = pow(1.0 + q, -beta)
        G = b
        G1 = -beta * b / (1.0 + q)
        G2 = beta * (beta + 1.0) * b / ((1.0 + q) * (1.0 + q))
    G *= m
    G1 *= m
    G2 *= m
    out[0] = G
    out[1] = 2.0 * G1 * ax
    out[2] = 2.0 * G1 * ay
    out[3] = 4.0 * G2 * ax * ax + 2.0 * G1 * a11
    out[4] = 4.0 * G2 * ax * ay + 2.0 * G1 * a12
    out[5] = 4.0 * G2 * ay * ay + 2.0 * G1 * a22


def splat_jets(germs, double ox, double oy, double hx, double hy, Py_ssize_t nx, Py_ssize_t ny):
    cdef const double[:, ::1] G = np.ascontiguousarray(germs, dtype=np.float64).reshape(-1, 9)
    res = np.zeros((6, nx, ny))
    cdef double[:, :, :] out = res
    cdef double buf[6]
    cdef Py_ssize_t n, i, j, k, i0, i1, j0, j1
    cdef double x, y, r2, r, dx, dy
    with nogil:
        for n in range(G.shape[0]):
            x = G[n, 0]
            y = G[n, 1]
            r2 = G[n, 8]
            r = sqrt(r2)
            i0 = <Py_ssize_t>ceil((x - r - ox) / hx)
            i1 = <Py_ssize_t>floor((x + r - ox) / hx)
            j0 = <Py_ssize_t>ceil((y - r - oy) / hy)
            j1 = <Py_ssize_t>floor((y + r - oy) / hy)
            if i0 < 0:
                i0 = 0
            if j0 < 0:
                j0 = 0
            if i1 > nx - 1:
                i1 = nx - 1
            if j1 > ny - 1:
                j1 = ny - 1
            for i in range(i0, i1 + 1):
                dx = ox + hx * i - x
                for j in range(j0, j1 + 1):
                    dy = oy + hy * j - y
                    if dx * dx + dy * dy > r2:
                        continue
                    _jets(&G[n, 0], dx, dy, buf)
                    for k in range(6):
                        out[k, i, j] += buf[k]
    return res


def probe_jets(germs, px, py):
    cdef const double[:, ::1] G = np.ascontiguousarray(germs, dtype=np.float64).reshape(-1, 9)
    cdef const double[:] X = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef const double[:] Y = np.ascontiguousarray(py, dtype=np.float64).ravel()
    res = np.zeros((6, X.shape[0]))
    cdef double[:, :] out = res
    cdef double buf[6]
    cdef Py_ssize_t n, p, k
    cdef double dx, dy
    with nogil:
        for n in range(G.shape[0]):
            for p in range(X.shape[0]):
                dx = X[p] - G[n, 0]
                dy = Y[p] - G[n, 1]
                if dx * dx + dy * dy > G[n, 8]:
                    continue
                _jets(&G[n, 0], dx, dy, buf)
                for k in range(6):
                    out[k, p] += buf[k]
    return res


def cf_sums(g0, ga, gb, gc, w, t, s1, s2, v, chunk=None):
    cdef const double[:] G0 = np.ascontiguousarray(g0, dtype=np.float64)
    cdef const double[:] GA = np.ascontiguousarray(ga, dtype=np.float64)
    cdef const double[:] GB = np.ascontiguousarray(gb, dtype=np.float64)
    cdef const double[:] GC = np.ascontiguousarray(gc, dtype=np.float64)
    cdef const double[:] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:] T = np.ascontiguousarray(np.atleast_1d(t), dtype=np.float64)
    cdef const double[:] S1 = np.ascontiguousarray(np.atleast_1d(s1), dtype=np.float64)
    cdef const double[:] S2 = np.ascontiguousarray(np.atleast_1d(s2), dtype=np.float64)
    cdef const double[:] V = np.ascontiguousarray(np.atleast_1d(v), dtype=np.float64)
    cdef Py_ssize_t K = T.shape[0], N = G0.shape[0], k, n
    res = np.zeros((8, K))
    cdef double[:, :] out = res
    cdef double phi, c, s, hs, ww, r0, i0, r1, i1, r2, i2, r3, i3
    with nogil:
        for k in range(K):
            r0 = i0 = r1 = i1 = r2 = i2 = r3 = i3 = 0.0
            for n in range(N):
                phi = T[k] * G0[n] + S1[k] * GA[n] + S2[k] * GB[n] + V[k] * GC[n]
                c = cos(phi)
                s = sin(phi)
                hs = sin(0.5 * phi)
                ww = W[n]
                r0 += -2.0 * hs * hs * ww
                i0 += s * ww
                r1 += c * ww * GC[n]
                i1 += s * ww * GC[n]
                r2 += c * ww * GA[n]
                i2 += s * ww * GA[n]
                r3 += c * ww * GA[n] * GA[n]
                i3 += s * ww * GA[n] * GA[n]
            out[0, k] = r0
            out[1, k] = i0
            out[2, k] = r1
            out[3, k] = i1
            out[4, k] = r2
            out[5, k] = i2
            out[6, k] = r3
            out[7, k] = i3
    return res[0::2] + 1j * res[1::2]
