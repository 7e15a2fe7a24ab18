# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels; see ``_pykernels`` for the reference semantics."""
import math

import numpy as np

from libc.stdlib cimport malloc, free
from libcpp.algorithm cimport sort
from libcpp.utility cimport pair

NAME = "cython"

# (value, original index): lexicographic order is the stable order by value
ctypedef pair[double, Py_ssize_t] Keyed


# Relative slack for the pruning tests below; it absorbs the two roundings
# in ``K * p / k`` so that pruning never changes a result.
cdef double SLACK = 1e-9


def simes_rows(P):
    """Simes statistic per row.

    Entries >= 1 only produce terms >= 1, which the final clamp removes, so
    they are dropped; the rest are bucket sorted by ``floor(K p)``, and only
    as far as the running minimum can still change.
    """
    cdef double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], K = p.shape[1], r, k, b, m, j, lo, hi
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double* buf
    cdef Py_ssize_t* start
    cdef Py_ssize_t* bid
    cdef double best, val, v, fK = <double>K
    with nogil:
        buf = <double*>malloc(K * sizeof(double))
        start = <Py_ssize_t*>malloc((K + 1) * sizeof(Py_ssize_t))
        bid = <Py_ssize_t*>malloc(K * sizeof(Py_ssize_t))
        for r in range(n):
            for b in range(K + 1):
                start[b] = 0
            m = 0
            for k in range(K):
                v = p[r, k]
                b = -1
                if v < 1.0:
                    b = <Py_ssize_t>(v * fK)
                    if b >= K:
                        b = K - 1
                    start[b + 1] += 1
                    m += 1
                bid[k] = b
            for b in range(K):
                start[b + 1] += start[b]
            for k in range(K):
                b = bid[k]
                if b >= 0:
                    buf[start[b]] = p[r, k]
                    start[b] += 1
            # sort bucket by bucket; once a bucket starts above the running
            # minimum, every later term K v / k >= v exceeds it as well
            best = 1.0
            lo = 0
            for b in range(K):
                hi = start[b]
                if hi == lo:
                    continue
                if b / fK >= best * (1.0 + SLACK):
                    break
                for k in range(lo + 1, hi):
                    v = buf[k]
                    j = k - 1
                    while j >= lo and buf[j] > v:
                        buf[j + 1] = buf[j]
                        j -= 1
                    buf[j + 1] = v
                for k in range(lo, hi):
                    val = fK * buf[k] / <double>(k + 1)
                    if val < best:
                        best = val
                lo = hi
            if best < 0.0:
                best = 0.0
            out[r] = best
        free(buf)
        free(start)
        free(bid)
    return out_arr


def bh_rows(P, is_null, double alpha):
    """BH step-up count and false rejections per row.

    A p-value above alpha can never pass ``K p / k <= alpha``, so only the
    entries below ``alpha (1 + slack)`` are sorted.
    """
    cdef double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], K = p.shape[1], r, k, m, kstar, false
    cdef unsigned char[:, ::1] null = np.ascontiguousarray(
        np.broadcast_to(np.asarray(is_null, dtype=bool), (n, K)), dtype=np.uint8
    )
    kstar_arr = np.empty(n, dtype=np.int64)
    false_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] ks = kstar_arr
    cdef long long[::1] fs = false_arr
    cdef Keyed* buf
    cdef double fK = <double>K, keep = alpha * (1.0 + SLACK)
    with nogil:
        buf = <Keyed*>malloc(K * sizeof(Keyed))
        for r in range(n):
            m = 0
            for k in range(K):
                if p[r, k] <= keep:
                    buf[m].first = p[r, k]
                    buf[m].second = k
                    m += 1
            sort(buf, buf + m)
            kstar = 0
            for k in range(m - 1, -1, -1):
                if fK * buf[k].first / <double>(k + 1) <= alpha:
                    kstar = k + 1
                    break
            false = 0
            for k in range(kstar):
                false += null[r, buf[k].second]
            ks[r] = kstar
            fs[r] = false
        free(buf)
    return kstar_arr, false_arr


def esym_rows(E, Py_ssize_t k):
    """Order-k U-statistic per row; rows form the inner loop, as in numpy."""
    cdef double[:, ::1] e = np.ascontiguousarray(E, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], K = e.shape[1], r, i, j, top
    acc_arr = np.zeros((k + 1, n), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef double denom = float(math.comb(K, k))
    with nogil:
        for r in range(n):
            acc[0, r] = 1.0
        for i in range(K):
            top = i + 1 if i + 1 < k else k
            for j in range(top, 0, -1):
                for r in range(n):
                    acc[j, r] = acc[j, r] + e[r, i] * acc[j - 1, r]
    return acc_arr[k] / denom
