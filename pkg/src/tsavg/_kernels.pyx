# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled scattered-point kernels.

Operation order matches :mod:`tsavg._kernels_py` exactly so both backends
produce bit-identical results. Do not compile with -ffast-math.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def compensated_dot(const double[:, ::1] values, const double[::1] weights):
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, c, v, t
    if weights.shape[0] != m:
        raise ValueError("values and weights disagree in length")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    for j in range(n):
        s = 0.0
        c = 0.0
        for i in range(m):
            v = values[i, j] * weights[i]
            t = s + v
            if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        res[j] = s + c
    return out


def linear_steps(const double[::1] mu, const double[::1] coef, double x0):
    cdef Py_ssize_t m = mu.shape[0]
    cdef Py_ssize_t i
    cdef double x = x0
    if coef.shape[0] != m:
        raise ValueError("mu and coef disagree in length")
    out = np.empty(m + 1, dtype=np.float64)
    cdef double[::1] res = out
    res[0] = x
    for i in range(m):
        x = x + mu[i] * (coef[i] * x)
        res[i + 1] = x
    return out


def first_exit(const double[::1] path, double lo, double hi):
    cdef Py_ssize_t i
    for i in range(path.shape[0]):
        if path[i] < lo or path[i] > hi:
            return i
    return -1
