# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; ``_fallback`` holds the numpy equivalents and documents the layouts."""
import numpy as np
from libc.math cimport floor

cdef int OPTIMAL = 0
cdef int UNBOUNDED = 1
cdef int ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t rows = T.shape[0], cols = T.shape[1]
    cdef Py_ssize_t i, k
    cdef double p = T[r, j], f
    for k in range(cols):
        T[r, k] /= p
    T[r, j] = 1.0
    for i in range(rows):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(cols):
                T[i, k] -= f * T[r, k]
            T[i, j] = 0.0


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    _pivot(T, r, j)


cdef int _loop(double[:, ::1] T, long[::1] basis, Py_ssize_t n_enter, double tol,
               Py_ssize_t max_iter, Py_ssize_t* iters) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t last = T.shape[1] - 1
    cdef Py_ssize_t it, i, j, r
    cdef double a, ratio, best
    for it in range(max_iter):
        iters[0] = it
        j = -1
        for i in range(n_enter):
            if T[m, i] < -tol:
                j = i
                break
        if j < 0:
            return OPTIMAL
        r = -1
        best = 0.0
        for i in range(m):
            a = T[i, j]
            if a > tol:
                ratio = T[i, last] / a
                if r < 0 or ratio < best - 1e-12 or (ratio <= best + 1e-12 and basis[i] < basis[r]):
                    r = i
                    best = ratio
        if r < 0:
            return UNBOUNDED
        _pivot(T, r, j)
        basis[r] = j
    iters[0] = max_iter
    return ITERATION_LIMIT


def pivot_loop(double[:, ::1] T, long[::1] basis, Py_ssize_t n_enter, double tol, Py_ssize_t max_iter):
    """Run Bland's-rule simplex iterations in place; returns (status, iterations)."""
    cdef Py_ssize_t iters = 0
    cdef int status
    with nogil:
        status = _loop(T, basis, n_enter, tol, max_iter, &iters)
    return status, iters


cdef inline double _iou(double sa, double ea, double sb, double eb) noexcept nogil:
    cdef double inter = (ea if ea < eb else eb) - (sa if sa > sb else sb)
    cdef double union
    if inter < 0.0:
        return 0.0
    union = (ea - sa) + (eb - sb) - inter
    if union > 0.0:
        return inter / union
    return 1.0 if (sa == sb and ea == eb) else 0.0


def greedy_groups(double[::1] starts, double[::1] ends, double threshold):
    """Group id per interval (intervals in rank order); see ``_fallback.greedy_groups``."""
    cdef Py_ssize_t n = starts.shape[0]
    out = np.full(n, -1, dtype=np.int_)
    cdef long[::1] group = out
    cdef Py_ssize_t a, k
    with nogil:
        for a in range(n):
            if group[a] >= 0:
                continue
            group[a] = a
            for k in range(a + 1, n):
                if group[k] < 0 and _iou(starts[k], ends[k], starts[a], ends[a]) > threshold:
                    group[k] = a
    return out


def class_runs(double[::1] col, double[::1] thresholds, double alpha):
    """Distinct above-threshold runs with their inner-outer contrast; see ``_fallback.class_runs``."""
    cdef Py_ssize_t l = col.shape[0], nt = thresholds.shape[0]
    cdef Py_ssize_t t, i, j, first, n = 0, L, lo, hi, n_out
    cdef double theta, inner, outer
    cdef bint dup
    csum_arr = np.zeros(l + 1)
    cdef double[::1] csum = csum_arr
    for i in range(l):
        csum[i + 1] = csum[i] + col[i]
    firsts_arr = np.empty(l * nt, dtype=np.int_)
    lasts_arr = np.empty(l * nt, dtype=np.int_)
    q_arr = np.empty(l * nt)
    cdef long[::1] firsts = firsts_arr, lasts = lasts_arr
    cdef double[::1] q = q_arr
    for t in range(nt):
        theta = thresholds[t]
        i = 0
        while i < l:
            if col[i] <= theta:
                i += 1
                continue
            first = i
            while i < l and col[i] > theta:
                i += 1
            # run is [first, i - 1]; skip if an earlier threshold produced it
            dup = False
            for j in range(n):
                if firsts[j] == first and lasts[j] == i - 1:
                    dup = True
                    break
            if dup:
                continue
            firsts[n] = first
            lasts[n] = i - 1
            n += 1
    for j in range(n):
        first, i = firsts[j], lasts[j]
        L = <Py_ssize_t>floor(alpha * (i - first) + 0.5)
        if L < 1:
            L = 1
        inner = (csum[i + 1] - csum[first]) / (i - first + 1)
        lo = first - L if first - L > 0 else 0
        hi = i + 1 + L if i + 1 + L < l else l
        n_out = (first - lo) + (hi - i - 1)
        outer = ((csum[first] - csum[lo]) + (csum[hi] - csum[i + 1])) / n_out if n_out > 0 else 0.0
        q[j] = inner - outer
    return firsts_arr[:n], lasts_arr[:n], q_arr[:n]
