# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for lower-triangular factor arithmetic.

Mirrors :mod:`joint_srukf._kernels_py` exactly; both operate in place and
report failures through an integer return code (-1 means success).
"""
from libc.math cimport sqrt, hypot


def chol_lower(double[:, ::1] P, double[:, ::1] L, double floor):
    cdef Py_ssize_t n = P.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double d, acc
    for j in range(n):
        d = P[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= floor:
            return j
        d = sqrt(d)
        L[j, j] = d
        for i in range(j + 1, n):
            acc = P[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / d
    return -1


def rank1_inplace(double[:, ::1] L, double[::1] v, int sign, double rel_tol):
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t i, k
    cdef double d, vk, r, r2, c, s, a
    for k in range(n):
        vk = v[k]
        if vk == 0.0:
            continue
        d = L[k, k]
        if sign > 0:
            r = hypot(d, vk)
            c = d / r
            s = vk / r
            L[k, k] = r
            v[k] = 0.0
            for i in range(k + 1, n):
                a = L[i, k]
                L[i, k] = c * a + s * v[i]
                v[i] = c * v[i] - s * a
        else:
            r2 = (d - vk) * (d + vk)
            if d <= 0.0 or r2 <= rel_tol * d * d:
                return k
            r = sqrt(r2)
            c = r / d
            s = vk / d
            L[k, k] = r
            v[k] = 0.0
            for i in range(k + 1, n):
                L[i, k] = (L[i, k] - s * v[i]) / c
                v[i] = c * v[i] - s * L[i, k]
    return -1
