# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled blockwise rotation kernels; same contracts as ``_fallback``."""
import numpy as np
cimport cython
from cython.parallel cimport prange
from libc.math cimport cos, sin, sqrt

cdef enum:
    ANGLE = 0
    QUAT = 1


cdef inline void _quat_mat(double w, double x, double y, double z, double[3][3] m) noexcept nogil:
    m[0][0] = 1 - 2 * (y * y + z * z)
    m[0][1] = 2 * (x * y - w * z)
    m[0][2] = 2 * (x * z + w * y)
    m[1][0] = 2 * (x * y + w * z)
    m[1][1] = 1 - 2 * (x * x + z * z)
    m[1][2] = 2 * (y * z - w * x)
    m[2][0] = 2 * (x * z - w * y)
    m[2][1] = 2 * (y * z + w * x)
    m[2][2] = 1 - 2 * (x * x + y * y)


def rotate(int kind, double[:, :, ::1] params, long[::1] rel, double[:, :, ::1] x, bint inverse=False):
    cdef Py_ssize_t n = x.shape[0], nb = x.shape[1], k = x.shape[2]
    cdef Py_ssize_t P = params.shape[2]
    cdef Py_ssize_t i, b, j, a, c, idx
    cdef Py_ssize_t m = P // k if kind > QUAT else 0
    cdef double th, cs, sn, w, qx, qy, qz, nrm, dot
    cdef double[3][3] R
    out_arr = np.empty((n, nb, k))
    cdef double[:, :, ::1] y = out_arr
    with nogil:
        for i in range(n):
            for b in range(nb):
                if kind == ANGLE:
                    th = params[rel[i], b, 0]
                    if inverse:
                        th = -th
                    cs = cos(th)
                    sn = sin(th)
                    y[i, b, 0] = cs * x[i, b, 0] - sn * x[i, b, 1]
                    y[i, b, 1] = sn * x[i, b, 0] + cs * x[i, b, 1]
                elif kind == QUAT:
                    w = params[rel[i], b, 0]
                    qx = params[rel[i], b, 1]
                    qy = params[rel[i], b, 2]
                    qz = params[rel[i], b, 3]
                    nrm = sqrt(w * w + qx * qx + qy * qy + qz * qz)
                    _quat_mat(w / nrm, qx / nrm, qy / nrm, qz / nrm, R)
                    for a in range(3):
                        y[i, b, a] = 0.0
                        for c in range(3):
                            if inverse:
                                y[i, b, a] += R[c][a] * x[i, b, c]
                            else:
                                y[i, b, a] += R[a][c] * x[i, b, c]
                else:
                    for a in range(k):
                        y[i, b, a] = x[i, b, a]
                    for j in range(m):
                        idx = (m - 1 - j) if inverse else j
                        dot = 0.0
                        for a in range(k):
                            dot += params[rel[i], b, idx * k + a] * y[i, b, a]
                        for a in range(k):
                            y[i, b, a] -= 2.0 * dot * params[rel[i], b, idx * k + a]
    return out_arr


def rotate_vjp(int kind, double[:, :, ::1] params, long[::1] rel, double[:, :, ::1] x,
               double[:, :, ::1] g, bint inverse=False, grad_params=None):
    cdef Py_ssize_t n = x.shape[0], nb = x.shape[1], k = x.shape[2]
    cdef Py_ssize_t P = params.shape[2]
    cdef Py_ssize_t m = P // k if kind > QUAT else 0
    cdef Py_ssize_t i, b, j, a, c, idx, step, r
    cdef double th, cs, sn, sign, gth, w, qx, qy, qz, nrm, ux, ug, dot
    cdef double[3][3] R
    cdef double[3][3] M
    cdef double gq[4]
    cdef double qh[4]
    if grad_params is None:
        grad_params = np.zeros_like(np.asarray(params))
    cdef double[:, :, ::1] gp = grad_params
    gx_arr = np.empty((n, nb, k))
    cdef double[:, :, ::1] gx = gx_arr
    # Householder forward states, (m + 1, k)
    states_arr = np.empty((max(m, 1) + 1, k))
    cdef double[:, ::1] st = states_arr
    with nogil:
        for i in range(n):
            r = rel[i]
            for b in range(nb):
                if kind == ANGLE:
                    sign = -1.0 if inverse else 1.0
                    th = sign * params[r, b, 0]
                    cs = cos(th)
                    sn = sin(th)
                    gth = (g[i, b, 0] * (-sn * x[i, b, 0] - cs * x[i, b, 1])
                           + g[i, b, 1] * (cs * x[i, b, 0] - sn * x[i, b, 1]))
                    gx[i, b, 0] = cs * g[i, b, 0] + sn * g[i, b, 1]
                    gx[i, b, 1] = -sn * g[i, b, 0] + cs * g[i, b, 1]
                    gp[r, b, 0] += sign * gth
                elif kind == QUAT:
                    w = params[r, b, 0]
                    qx = params[r, b, 1]
                    qy = params[r, b, 2]
                    qz = params[r, b, 3]
                    nrm = sqrt(w * w + qx * qx + qy * qy + qz * qz)
                    w = w / nrm
                    qx = qx / nrm
                    qy = qy / nrm
                    qz = qz / nrm
                    _quat_mat(w, qx, qy, qz, R)
                    for a in range(3):
                        gx[i, b, a] = 0.0
                        for c in range(3):
                            if inverse:
                                gx[i, b, a] += R[a][c] * g[i, b, c]
                                M[a][c] = x[i, b, a] * g[i, b, c]
                            else:
                                gx[i, b, a] += R[c][a] * g[i, b, c]
                                M[a][c] = g[i, b, a] * x[i, b, c]
                    gq[0] = 2 * (-qz * M[0][1] + qy * M[0][2] + qz * M[1][0] - qx * M[1][2]
                                 - qy * M[2][0] + qx * M[2][1])
                    gq[1] = 2 * (qy * M[0][1] + qz * M[0][2] + qy * M[1][0] - 2 * qx * M[1][1]
                                 - w * M[1][2] + qz * M[2][0] + w * M[2][1] - 2 * qx * M[2][2])
                    gq[2] = 2 * (-2 * qy * M[0][0] + qx * M[0][1] + w * M[0][2] + qx * M[1][0]
                                 + qz * M[1][2] - w * M[2][0] + qz * M[2][1] - 2 * qy * M[2][2])
                    gq[3] = 2 * (-2 * qz * M[0][0] - w * M[0][1] + qx * M[0][2] + w * M[1][0]
                                 - 2 * qz * M[1][1] + qy * M[1][2] + qx * M[2][0] + qy * M[2][1])
                    qh[0] = w
                    qh[1] = qx
                    qh[2] = qy
                    qh[3] = qz
                    dot = 0.0
                    for a in range(4):
                        dot += qh[a] * gq[a]
                    for a in range(4):
                        gp[r, b, a] += (gq[a] - qh[a] * dot) / nrm
                else:
                    for a in range(k):
                        st[0, a] = x[i, b, a]
                    for step in range(m):
                        idx = (m - 1 - step) if inverse else step
                        dot = 0.0
                        for a in range(k):
                            dot += params[r, b, idx * k + a] * st[step, a]
                        for a in range(k):
                            st[step + 1, a] = st[step, a] - 2.0 * dot * params[r, b, idx * k + a]
                    for a in range(k):
                        gx[i, b, a] = g[i, b, a]
                    for step in range(m - 1, -1, -1):
                        idx = (m - 1 - step) if inverse else step
                        ux = 0.0
                        ug = 0.0
                        for a in range(k):
                            ux += params[r, b, idx * k + a] * st[step, a]
                            ug += params[r, b, idx * k + a] * gx[i, b, a]
                        for a in range(k):
                            gp[r, b, idx * k + a] += -2.0 * (ux * gx[i, b, a] + ug * st[step, a])
                        for a in range(k):
                            gx[i, b, a] -= 2.0 * ug * params[r, b, idx * k + a]
    return gx_arr, grad_params


def query_distances(queries, double[:, ::1] centers, int threads=1):
    cdef double[:, ::1] q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef Py_ssize_t nq = q.shape[0], ne = centers.shape[0], d = centers.shape[1]
    cdef Py_ssize_t i, e, a
    cdef double acc, diff
    out_arr = np.empty((nq, ne))
    cdef double[:, ::1] out = out_arr
    for i in prange(nq, nogil=True, num_threads=max(threads, 1), schedule="static"):
        for e in range(ne):
            acc = 0.0
            for a in range(d):
                diff = centers[e, a] - q[i, a]
                acc = acc + diff * diff
            out[i, e] = sqrt(acc)
    return out_arr


def scatter_add_rows(out_arr, long[::1] idx, double[:, ::1] rows, double scale=1.0):
    """``out[idx[i]] += scale * rows[i]``, in row order."""
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n = rows.shape[0], d = rows.shape[1]
    cdef Py_ssize_t i, a, r
    with nogil:
        for i in range(n):
            r = idx[i]
            for a in range(d):
                out[r, a] += scale * rows[i, a]
    return out_arr


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v, double lr, double b1,
                double b2, double eps, double bc1, double bc2):
    """In-place Adam step on flat arrays; ``bc1``/``bc2`` are the bias corrections."""
    cdef Py_ssize_t n = p.shape[0], i
    cdef double mhat, vhat
    with nogil:
        for i in range(n):
            m[i] = m[i] * b1 + (1 - b1) * g[i]
            v[i] = v[i] * b2 + (1 - b2) * g[i] * g[i]
            mhat = m[i] / bc1
            vhat = v[i] / bc2
            p[i] = p[i] - lr * mhat / (sqrt(vhat) + eps)
