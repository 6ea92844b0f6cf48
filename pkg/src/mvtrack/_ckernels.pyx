# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled clustering kernels; same contract as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport isnan, sqrt, INFINITY, NAN

cnp.import_array()


cdef inline double _fmax(double a, double b) noexcept nogil:
    if isnan(a):
        return b
    if isnan(b):
        return a
    return a if a >= b else b


cdef list _merge(double[:, ::1] D, double threshold, cnp.int64_t[::1] roots):
    cdef Py_ssize_t n = D.shape[0]
    cdef Py_ssize_t i, j, q, bi, bj
    cdef double d, best, new
    cdef cnp.uint8_t[::1] active = np.ones(n, dtype=np.uint8)
    cdef list merges = []
    while True:
        best = INFINITY
        bi = -1
        bj = -1
        with nogil:
            for i in range(n):
                if not active[i]:
                    continue
                for j in range(i + 1, n):
                    if not active[j]:
                        continue
                    d = D[i, j]
                    if d < threshold and d < best:
                        best = d
                        bi = i
                        bj = j
            if bi >= 0:
                for q in range(n):
                    if not active[q] or q == bi or q == bj:
                        continue
                    new = _fmax(D[bi, q], D[bj, q])
                    D[bi, q] = new
                    D[q, bi] = new
                active[bj] = 0
                for q in range(n):
                    D[bj, q] = NAN
                    D[q, bj] = NAN
                D[bi, bi] = NAN
                for q in range(n):
                    if roots[q] == bj:
                        roots[q] = bi
        if bi < 0:
            break
        merges.append((bi, bj, best))
    return merges


def propagable_linkage(D, double threshold):
    cdef double[:, ::1] M = np.array(D, dtype=np.float64, order="C", copy=True)
    roots = np.arange(M.shape[0], dtype=np.int64)
    merges = _merge(M, threshold, roots)
    return roots, merges, np.asarray(M)


def complete_linkage_points(X, double threshold):
    cdef double[:, ::1] P = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s, t
    M_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] M = M_arr
    for i in range(n):
        M[i, i] = 0.0
        for j in range(i + 1, n):
            s = 0.0
            for k in range(P.shape[1]):
                t = P[i, k] - P[j, k]
                s += t * t
            M[i, j] = sqrt(s)
            M[j, i] = M[i, j]
    roots = np.arange(n, dtype=np.int64)
    _merge(M, threshold, roots)
    return roots
