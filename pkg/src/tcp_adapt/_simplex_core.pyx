# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-wise Euclidean projection onto the probability simplex.

This is the hot kernel of the saddle-point solver: it runs once per
iteration on the full (m, K) labeling matrix. The algorithm is the exact
sort-and-threshold method: find tau so that sum(max(v_i - tau, 0)) = 1.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _sort_desc(double* buf, Py_ssize_t k) noexcept nogil:
    # insertion sort; K is small (tens at most)
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, k):
        key = buf[i]
        j = i - 1
        while j >= 0 and buf[j] < key:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = key


cdef double _row_threshold(double* s, Py_ssize_t k) noexcept nogil:
    # s is sorted descending; returns tau with sum(max(s_i - tau, 0)) = 1
    cdef Py_ssize_t j
    cdef double csum = 0.0, tau = 0.0, best_tau = 0.0
    for j in range(k):
        csum += s[j]
        tau = (csum - 1.0) / (j + 1)
        if s[j] - tau > 0.0:
            best_tau = tau
    return best_tau


def project_rows(cnp.ndarray[cnp.float64_t, ndim=2] q):
    """Project every row of ``q`` onto the simplex. Returns a new array."""
    cdef Py_ssize_t m = q.shape[0]
    cdef Py_ssize_t k = q.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((m, k))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(k)
    cdef double[:, ::1] qv = np.ascontiguousarray(q)
    cdef double[:, ::1] ov = out
    cdef double[::1] wv = work
    cdef Py_ssize_t i, j
    cdef double tau, x, mx
    with nogil:
        for i in range(m):
            # shifting by the row max leaves the projection unchanged and
            # keeps the threshold well conditioned for huge inputs
            mx = qv[i, 0]
            for j in range(1, k):
                if qv[i, j] > mx:
                    mx = qv[i, j]
            for j in range(k):
                wv[j] = qv[i, j] - mx
            _sort_desc(&wv[0], k)
            tau = _row_threshold(&wv[0], k)
            for j in range(k):
                x = qv[i, j] - mx - tau
                ov[i, j] = x if x > 0.0 else 0.0
    return out
