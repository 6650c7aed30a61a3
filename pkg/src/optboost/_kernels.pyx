# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge-selection kernel.

Must stay bit-identical to ``_fallback.select_edge``: each edge is summed
over points in ascending index order starting from 0.0, and the argmax keeps
the smallest row index on ties.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def select_edge(const double[:, ::1] mistake_t, const double[::1] w):
    cdef Py_ssize_t n = mistake_t.shape[0]
    cdef Py_ssize_t m = mistake_t.shape[1]
    cdef Py_ssize_t i, j, best_j = 0
    cdef double wi, best
    if w.shape[0] != n:
        raise ValueError("weight vector length does not match pool")
    if m < 1:
        raise ValueError("empty pool")
    acc_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    with nogil:
        for i in range(n):
            wi = w[i]
            for j in range(m):
                acc[j] = acc[j] + mistake_t[i, j] * wi
        best = acc[0]
        for j in range(1, m):
            if acc[j] > best:
                best = acc[j]
                best_j = j
    return best_j, best


def all_edges(const double[:, ::1] mistake_t, const double[::1] w):
    cdef Py_ssize_t n = mistake_t.shape[0]
    cdef Py_ssize_t m = mistake_t.shape[1]
    cdef Py_ssize_t i, j
    cdef double wi
    acc_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    with nogil:
        for i in range(n):
            wi = w[i]
            for j in range(m):
                acc[j] = acc[j] + mistake_t[i, j] * wi
    return acc_arr
