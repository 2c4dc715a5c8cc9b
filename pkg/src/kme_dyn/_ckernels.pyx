# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel sums.

Same contract as ``_pykernels``. Each row of ``K`` is produced into a scratch
buffer with the coordinate loop outside the point loop, so the point loop is
contiguous and the compiler can use the vector ``exp``. Row contributions are
accumulated in row order, so results do not depend on anything but inputs.
"""

import numpy as np

from libc.math cimport exp, fmin
from libc.stdlib cimport free, malloc

NAME = "cython"

cdef enum:
    LINEAR = 0
    POLYNOMIAL = 1
    GAUSSIAN = 2
    EXPONENTIAL = 3


cdef int _row(int kind, double param, const double* x, const double* yt,
              Py_ssize_t ld, Py_ssize_t start, Py_ssize_t m, Py_ssize_t d,
              double* out, double* scratch) noexcept nogil:
    """Write k(x, y_j) for j in [start, start + m) into out[0:m].

    ``yt`` holds the points column-wise: coordinate k of point j is
    ``yt[k * ld + j]``. Returns 1 if the exponential cap was exceeded.
    """
    cdef Py_ssize_t j, k
    cdef int q, p
    cdef int flag = 0
    cdef const double* col
    cdef double xk, diff

    for j in range(m):
        out[j] = 0.0

    if kind == GAUSSIAN:
        for k in range(d):
            xk = x[k]
            col = yt + k * ld + start
            for j in range(m):
                diff = xk - col[j]
                out[j] += diff * diff
        # exp(-708) is the smallest normal result; past it the vector exp
        # drops to a slow scalar path, and the true value is 0 to working precision
        for j in range(m):
            diff = param * out[j]
            out[j] = exp(-fmin(diff, 708.0)) * (diff < 708.0)
        return 0

    for k in range(d):
        xk = x[k]
        col = yt + k * ld + start
        for j in range(m):
            out[j] += xk * col[j]

    if kind == POLYNOMIAL:
        p = <int>param
        for j in range(m):
            scratch[j] = out[j] + 1.0
            out[j] = scratch[j]
        for q in range(p - 1):
            for j in range(m):
                out[j] *= scratch[j]
    elif kind == EXPONENTIAL:
        for j in range(m):
            if out[j] > param:
                flag = 1
        if flag:
            return 1
        for j in range(m):
            out[j] = exp(out[j])
    return 0


def _prepare(X, Y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    yt = np.ascontiguousarray(np.asarray(Y, dtype=np.float64).T)
    return X, yt


def gram(X, Y, int kind, double param, bint symmetric=False):
    X, yt = _prepare(X, Y)
    cdef const double[:, ::1] xv = X
    cdef const double[:, ::1] ytv = yt
    cdef Py_ssize_t n = X.shape[0], m = yt.shape[1], d = X.shape[1]
    cdef Py_ssize_t i, j
    cdef int flag = 0
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    if n == 0 or m == 0:
        return out
    cdef double* scratch = <double*>malloc(m * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                if symmetric:
                    flag |= _row(kind, param, &xv[i, 0], &ytv[0, 0], m, i, m - i, d,
                                 &ov[i, i], scratch)
                    for j in range(i + 1, m):
                        ov[j, i] = ov[i, j]
                else:
                    flag |= _row(kind, param, &xv[i, 0], &ytv[0, 0], m, 0, m, d,
                                 &ov[i, 0], scratch)
                if flag:
                    break
    finally:
        free(scratch)
    if flag:
        raise OverflowError("exponential kernel argument exceeds cap %g" % param)
    return out


def weighted_sum(X, a, Y, b, int kind, double param, bint symmetric=False):
    X, yt = _prepare(X, Y)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] xv = X
    cdef const double[:, ::1] ytv = yt
    cdef const double[::1] av = a
    cdef const double[::1] bv = b
    cdef Py_ssize_t n = X.shape[0], m = yt.shape[1], d = X.shape[1]
    cdef Py_ssize_t i, j
    cdef int flag = 0
    cdef double total = 0.0, sa, sb, s
    if n == 0 or m == 0:
        return 0.0
    cdef double* buf = <double*>malloc(2 * m * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* scratch = buf + m
    try:
        with nogil:
            for i in range(n):
                if symmetric:
                    flag |= _row(kind, param, &xv[i, 0], &ytv[0, 0], m, i, m - i, d,
                                 buf, scratch)
                    sa = 0.0
                    sb = 0.0
                    for j in range(1, m - i):
                        sa = sa + buf[j] * av[i + j]
                        sb = sb + buf[j] * bv[i + j]
                    total += av[i] * bv[i] * buf[0] + av[i] * sb + bv[i] * sa
                else:
                    flag |= _row(kind, param, &xv[i, 0], &ytv[0, 0], m, 0, m, d,
                                 buf, scratch)
                    s = 0.0
                    for j in range(m):
                        s = s + buf[j] * bv[j]
                    total += av[i] * s
                if flag:
                    break
    finally:
        free(buf)
    if flag:
        raise OverflowError("exponential kernel argument exceeds cap %g" % param)
    return total
