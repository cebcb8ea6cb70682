# cython: language_level=3
"""Compiled hot loops: row scans with early exit, fused trapezoid
integration, event flags and the Genz separation-of-variables integrand.

Mirrors ``_core_py`` exactly; see that module for the contracts.
"""
import numpy as np

from scipy.special.cython_special cimport ndtr, ndtri

BACKEND = "cython"


def first_exceed(double[:, ::1] values, double level):
    cdef Py_ssize_t n = values.shape[0], m = values.shape[1]
    cdef Py_ssize_t i, j
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] res = out
    with nogil:
        for i in range(n):
            res[i] = m
            for j in range(m):
                if values[i, j] >= level:
                    res[i] = j
                    break
    return out


def cumtrapz(double[:, ::1] paths, double dt):
    cdef Py_ssize_t n = paths.shape[0], m = paths.shape[1]
    cdef Py_ssize_t i, j
    cdef double half = 0.5 * dt, acc
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] x = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(1, m):
                acc = acc + (paths[i, j] + paths[i, j - 1]) * half
                x[i, j] = acc
    return out


def trapz_first_exceed(double[:, ::1] paths, double dt, double level):
    cdef Py_ssize_t n = paths.shape[0], m = paths.shape[1]
    cdef Py_ssize_t i, j
    cdef double half = 0.5 * dt, acc
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] res = out
    with nogil:
        for i in range(n):
            res[i] = m - 1
            acc = 0.0
            for j in range(1, m):
                acc = acc + (paths[i, j] + paths[i, j - 1]) * half
                if acc >= level:
                    res[i] = j - 1
                    break
    return out


def event_flags(double[:, ::1] values, inside_mask, double level):
    cdef Py_ssize_t n = values.shape[0], m = values.shape[1]
    cdef Py_ssize_t i, j
    cdef unsigned char[::1] inside = np.ascontiguousarray(inside_mask, dtype=np.uint8)
    cdef double v, max_in, max_out
    cdef int all_below
    out = np.zeros((n, 3), dtype=np.uint8)
    cdef unsigned char[:, ::1] flags = out
    with nogil:
        for i in range(n):
            all_below = 1
            max_in = 0.0
            max_out = -1.0 / 0.0
            for j in range(m):
                v = values[i, j]
                if v >= level:
                    all_below = 0
                if inside[j]:
                    if v > max_in:
                        max_in = v
                elif v > max_out:
                    max_out = v
            flags[i, 0] = all_below
            flags[i, 1] = max_in > max_out
            flags[i, 2] = max_out < 0.0
    return out


def genz_sov(double[:, ::1] chol, double[::1] b, double[:, ::1] w):
    # column-outer order: the points of one column are independent, so the
    # special-function calls pipeline instead of forming one serial chain
    cdef Py_ssize_t n = b.shape[0], npts = w.shape[0]
    cdef Py_ssize_t p, i, j
    cdef double shift, d, e, u, bi
    out = np.ones(npts, dtype=np.float64)
    cdef double[::1] f = out
    ybuf = np.zeros((npts, max(n, 1)), dtype=np.float64)
    cdef double[:, ::1] y = ybuf
    with nogil:
        for i in range(n):
            d = chol[i, i]
            bi = b[i]
            for p in range(npts):
                shift = 0.0
                for j in range(i):
                    shift = shift + chol[i, j] * y[p, j]
                if d > 0.0:
                    e = ndtr((bi - shift) / d)
                else:
                    e = 1.0 if bi - shift >= 0.0 else 0.0
                f[p] = f[p] * e
                if i < n - 1 and d > 0.0:
                    u = w[p, i] * e
                    if u < 1e-300:
                        u = 1e-300
                    elif u > 1.0 - 1e-16:
                        u = 1.0 - 1e-16
                    y[p, i] = ndtri(u)
    return out
