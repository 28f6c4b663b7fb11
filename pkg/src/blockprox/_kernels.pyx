# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for mirror-prox iterations.

Both kernels advance a box-constrained iterate under an affine expected map
F(x) = s(x) * (A x + b), where s is either constant 1 or s0 + s1*sin(sum x).
All randomness is pre-drawn by the caller (block indices, two standard-normal
panels per chunk), so a chunk is a pure function of its inputs and matches
the pure-Python loops up to floating-point association.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sin, sqrt

cnp.import_array()


cdef inline double _clip(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline double _vec_sum(const double* x, Py_ssize_t n) nogil:
    cdef Py_ssize_t l
    cdef double acc = 0.0
    for l in range(n):
        acc += x[l]
    return acc


cdef inline double _dist(const double* x, const double* xstar, Py_ssize_t n) nogil:
    cdef Py_ssize_t l
    cdef double acc = 0.0, diff
    for l in range(n):
        diff = x[l] - xstar[l]
        acc += diff * diff
    return sqrt(acc)


def bsmp_chunk(double[:, ::1] A, double[::1] b, int scale_kind, double s0, double s1,
               long long[::1] offsets,
               double[::1] lower, double[::1] upper,
               double[::1] sigma_t, double[::1] sigma,
               double[::1] x,
               long long[::1] blocks, double[::1] gam,
               int has_avg, double[::1] wavg, double[::1] xbar, double S,
               double[:, ::1] zt, double[:, ::1] z,
               int has_err, double[::1] err, double[::1] xstar):
    """Run len(gam) randomized-block iterations in place; returns updated S."""
    cdef Py_ssize_t m = gam.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t max_sz = 0, t, j, l, i, off, sz
    cdef double gk, sc, sumx, sumy, acc, w
    for i in range(offsets.shape[0] - 1):
        if offsets[i + 1] - offsets[i] > max_sz:
            max_sz = offsets[i + 1] - offsets[i]

    base_arr = np.empty(max_sz, dtype=np.float64)
    ynew_arr = np.empty(max_sz, dtype=np.float64)
    xnew_arr = np.empty(max_sz, dtype=np.float64)
    cdef double[::1] base = base_arr
    cdef double[::1] ynew = ynew_arr
    cdef double[::1] xnew = xnew_arr

    with nogil:
        for t in range(m):
            i = blocks[t]
            off = offsets[i]
            sz = offsets[i + 1] - offsets[i]
            gk = gam[t]

            # first projection: block of F at x_k with the first noise draw
            sc = 1.0
            if scale_kind == 1:
                sumx = _vec_sum(&x[0], n)
                sc = s0 + s1 * sin(sumx)
            for j in range(sz):
                acc = b[off + j]
                for l in range(n):
                    acc += A[off + j, l] * x[l]
                base[j] = acc
            for j in range(sz):
                acc = sc * base[j] + sigma_t[off + j] * zt[t, off + j]
                ynew[j] = _clip(x[off + j] - gk * acc, lower[off + j], upper[off + j])

            # second projection: same block of F at y_{k+1}, anchored at x_k
            if scale_kind == 1:
                sumy = sumx
                for j in range(sz):
                    sumy += ynew[j] - x[off + j]
                sc = s0 + s1 * sin(sumy)
            for j in range(sz):
                acc = base[j]
                for l in range(sz):
                    acc += A[off + j, off + l] * (ynew[l] - x[off + l])
                acc = sc * acc + sigma[off + j] * z[t, off + j]
                xnew[j] = _clip(x[off + j] - gk * acc, lower[off + j], upper[off + j])
            for j in range(sz):
                x[off + j] = xnew[j]

            if has_avg == 1:
                w = wavg[t]
                S = S + w
                for l in range(n):
                    xbar[l] += (w / S) * (x[l] - xbar[l])
            if has_err == 1:
                err[t] = _dist(&x[0], &xstar[0], n)
    return S


def smp_chunk(double[:, ::1] A, double[::1] b, int scale_kind, double s0, double s1,
              long long[::1] offsets,
              double[::1] lower, double[::1] upper,
              double[::1] sigma_t, double[::1] sigma,
              double[::1] x,
              double[::1] gam,
              int has_avg, double[::1] wavg, double[::1] ybar, double S,
              double[:, ::1] zt, double[:, ::1] z,
              int has_err, double[::1] err, double[::1] xstar):
    """Run len(gam) full-block iterations in place; returns updated Gamma."""
    cdef Py_ssize_t m = gam.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t t, j, l
    cdef double gk, sc, acc, w

    y_arr = np.empty(n, dtype=np.float64)
    f_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef double[::1] fv = f_arr

    with nogil:
        for t in range(m):
            gk = gam[t]

            sc = 1.0
            if scale_kind == 1:
                sc = s0 + s1 * sin(_vec_sum(&x[0], n))
            for j in range(n):
                acc = b[j]
                for l in range(n):
                    acc += A[j, l] * x[l]
                fv[j] = sc * acc + sigma_t[j] * zt[t, j]
            for j in range(n):
                y[j] = _clip(x[j] - gk * fv[j], lower[j], upper[j])

            sc = 1.0
            if scale_kind == 1:
                sc = s0 + s1 * sin(_vec_sum(&y[0], n))
            for j in range(n):
                acc = b[j]
                for l in range(n):
                    acc += A[j, l] * y[l]
                fv[j] = sc * acc + sigma[j] * z[t, j]
            for j in range(n):
                x[j] = _clip(x[j] - gk * fv[j], lower[j], upper[j])

            if has_avg == 1:
                w = wavg[t]
                S = S + w
                for l in range(n):
                    ybar[l] += (w / S) * (y[l] - ybar[l])
            if has_err == 1:
                err[t] = _dist(&x[0], &xstar[0], n)
    return S
