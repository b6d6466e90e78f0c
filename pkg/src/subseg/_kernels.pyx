# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: edit alignment and the CTC forward recursion."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, INFINITY

cnp.import_array()


def edit_alignment(ref, hyp):
    cdef cnp.int64_t[::1] r = np.ascontiguousarray(ref, dtype=np.int64)
    cdef cnp.int64_t[::1] h = np.ascontiguousarray(hyp, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0], m = h.shape[0]
    cdef cnp.int32_t[:, ::1] dist = np.empty((n + 1, m + 1), dtype=np.int32)
    cdef Py_ssize_t i, j
    cdef int best, d, cur
    cdef bint same
    for i in range(n + 1):
        dist[i, 0] = i
    for j in range(m + 1):
        dist[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = dist[i - 1, j - 1] + (0 if r[i - 1] == h[j - 1] else 1)
            d = dist[i - 1, j] + 1
            if d < best:
                best = d
            d = dist[i, j - 1] + 1
            if d < best:
                best = d
            dist[i, j] = best

    out_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    i = n
    j = m
    while i > 0 or j > 0:
        cur = dist[i, j]
        if i > 0 and j > 0:
            same = r[i - 1] == h[j - 1]
            if (same and dist[i - 1, j - 1] == cur) or (not same and dist[i - 1, j - 1] + 1 == cur):
                out[i - 1] = j - 1
                i -= 1
                j -= 1
                continue
        if i > 0 and dist[i - 1, j] + 1 == cur:
            i -= 1
            continue
        j -= 1
    return out_arr.tolist()


cdef inline double _logaddexp(double a, double b) nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def ctc_forward(log_probs, target, Py_ssize_t blank):
    cdef double[:, ::1] lp = np.ascontiguousarray(log_probs, dtype=np.float64)
    cdef cnp.int64_t[::1] tgt = np.ascontiguousarray(target, dtype=np.int64)
    cdef Py_ssize_t T = lp.shape[0], L = tgt.shape[0]
    cdef Py_ssize_t S = 2 * L + 1
    cdef Py_ssize_t s, t, k
    cdef double acc
    ext_arr = np.full(S, blank, dtype=np.int64)
    cdef cnp.int64_t[::1] ext = ext_arr
    for k in range(L):
        ext[2 * k + 1] = tgt[k]
    cdef double[::1] alpha = np.full(S, -INFINITY)
    cdef double[::1] new = np.full(S, -INFINITY)
    cdef double[::1] tmp
    alpha[0] = lp[0, blank]
    if S > 1:
        alpha[1] = lp[0, ext[1]]
    with nogil:
        for t in range(1, T):
            for s in range(S):
                acc = alpha[s]
                if s >= 1:
                    acc = _logaddexp(acc, alpha[s - 1])
                if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                    acc = _logaddexp(acc, alpha[s - 2])
                if acc == -INFINITY:
                    new[s] = -INFINITY
                else:
                    new[s] = acc + lp[t, ext[s]]
            tmp = alpha
            alpha = new
            new = tmp
    acc = alpha[S - 1]
    if S > 1:
        acc = _logaddexp(acc, alpha[S - 2])
    return -acc
