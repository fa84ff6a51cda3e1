# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels.

Must match contesteq._kernels._ref semantics bit-for-bit up to floating
rounding; the test suite cross-checks the two backends.
"""

from libc.math cimport exp, lgamma, log, log1p

import numpy as np


cdef void _binom_pmf_row(int n, double p, double[::1] row, int bmax) noexcept:
    """Fill row[0..bmax] with Bin(n, p) pmf values (zeros beyond count n)."""
    cdef int b, top
    cdef double lp, lq, lgn
    top = bmax if bmax < n else n
    for b in range(bmax + 1):
        row[b] = 0.0
    if p <= 0.0:
        row[0] = 1.0
        return
    if p >= 1.0:
        if n <= bmax:
            row[n] = 1.0
        return
    lp = log(p)
    lq = log1p(-p)
    lgn = lgamma(n + 1.0)
    for b in range(top + 1):
        row[b] = exp(lgn - lgamma(b + 1.0) - lgamma(n - b + 1.0)
                     + b * lp + (n - b) * lq)


def win_prob_batch(int own_n, own_tails, int other_n, other_tails, int k):
    """Pr[Bin(own_n, own_tails[i]) + Bin(other_n, other_tails[j]) <= k-1]."""
    own = np.ascontiguousarray(np.atleast_1d(own_tails), dtype=np.float64)
    other = np.ascontiguousarray(np.atleast_1d(other_tails), dtype=np.float64)
    cdef Py_ssize_t m = own.shape[0]
    cdef Py_ssize_t d = other.shape[0]
    out = np.empty((m, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    if k - 1 >= own_n + other_n:
        out[:] = 1.0
        return out

    cdef int bmax = min(own_n, k - 1)
    cdef int jmax = min(other_n, k - 1)
    cdef double[::1] ows = own
    cdef double[::1] oth = other

    pmf_own_arr = np.zeros((m, bmax + 1), dtype=np.float64)
    cdef double[:, ::1] pmf_own = pmf_own_arr
    for i in range(m):
        _binom_pmf_row(own_n, ows[i], pmf_own[i], bmax)

    # Other-group CDF at 0..k-1 (saturating once every count is included).
    cdf_other_arr = np.zeros((d, k), dtype=np.float64)
    cdef double[:, ::1] cdf_other = cdf_other_arr
    cdef double[::1] scratch = np.zeros(jmax + 1, dtype=np.float64)
    cdef double acc
    cdef int b
    for j in range(d):
        _binom_pmf_row(other_n, oth[j], scratch, jmax)
        acc = 0.0
        for b in range(jmax + 1):
            acc += scratch[b]
            cdf_other[j, b] = acc
        for b in range(jmax + 1, k):
            cdf_other[j, b] = acc

    cdef double total
    for i in range(m):
        for j in range(d):
            total = 0.0
            for b in range(bmax + 1):
                total += pmf_own[i, b] * cdf_other[j, k - 1 - b]
            if total < 0.0:
                total = 0.0
            elif total > 1.0:
                total = 1.0
            o[i, j] = total
    return out
