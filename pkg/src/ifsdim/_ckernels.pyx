# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled orbit and ball-count kernels; see _pykernels for the reference semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, pow, sqrt

cnp.import_array()


def orbit(const signed char[::1] kinds, const double[:, :, ::1] lin,
          const double[:, ::1] trans, const double[:, ::1] rad,
          const long long[::1] symbols, x0, Py_ssize_t burn_in, double guard):
    cdef Py_ssize_t n_steps = symbols.shape[0]
    cdef Py_ssize_t d = trans.shape[1]
    cdef Py_ssize_t n_out = n_steps - burn_in if n_steps > burn_in else 0
    out_arr = np.empty((n_out, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] y = np.empty(d, dtype=np.float64)
    cdef Py_ssize_t t, k, j, i
    cdef double acc, r2, a, v
    cdef Py_ssize_t escaped = -1
    with nogil:
        for t in range(n_steps):
            i = symbols[t] - 1
            if kinds[i] == 0:
                for k in range(d):
                    y[k] = lin[i, k, k] * x[k] + trans[i, k]
            elif kinds[i] == 1:
                for k in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc = acc + lin[i, k, j] * x[j]
                    y[k] = acc + trans[i, k]
            else:
                r2 = 0.0
                for k in range(d):
                    r2 = r2 + x[k] * x[k]
                a = rad[i, 0] - rad[i, 1] * pow(r2, rad[i, 2])
                for k in range(d):
                    y[k] = a * x[k] + trans[i, k]
            for k in range(d):
                v = y[k]
                if not (-guard <= v <= guard):
                    escaped = t
                    break
                x[k] = v
            if escaped >= 0:
                break
            if t >= burn_in:
                for k in range(d):
                    out[t - burn_in, k] = x[k]
    if escaped >= 0:
        k = escaped - burn_in if escaped > burn_in else 0
        return out_arr[:k], escaped
    return out_arr, -1


def count_within(const double[:, ::1] points, const long long[::1] cell_start,
                 const long long[::1] dims, const double[::1] lo, double h,
                 const double[::1] x, const double[::1] radii2):
    cdef Py_ssize_t d = dims.shape[0]
    cdef Py_ssize_t nr = radii2.shape[0]
    counts_arr = np.zeros(nr, dtype=np.int64)
    if nr == 0:
        return counts_arr
    cdef long long[::1] counts = counts_arr
    cdef long long[::1] lo_c = np.empty(d, dtype=np.int64)
    cdef long long[::1] hi_c = np.empty(d, dtype=np.int64)
    cdef long long[::1] idx = np.empty(d, dtype=np.int64)
    cdef double r = sqrt(radii2[0])
    cdef long long a, b, base, s, e, p
    cdef Py_ssize_t k, j
    cdef double d2, diff
    for k in range(d):
        a = <long long>floor((x[k] - r - lo[k]) / h) - 1
        b = <long long>floor((x[k] + r - lo[k]) / h) + 1
        if a < 0:
            a = 0
        if b > dims[k] - 1:
            b = dims[k] - 1
        if a > b:
            return counts_arr
        lo_c[k] = a
        hi_c[k] = b
        idx[k] = a
    with nogil:
        while True:
            base = 0
            for k in range(d - 1):
                base = base * dims[k] + idx[k]
            base = base * dims[d - 1]
            s = cell_start[base + lo_c[d - 1]]
            e = cell_start[base + hi_c[d - 1] + 1]
            for p in range(s, e):
                d2 = 0.0
                for k in range(d):
                    diff = points[p, k] - x[k]
                    d2 = d2 + diff * diff
                for j in range(nr):
                    if d2 <= radii2[j]:
                        counts[j] += 1
                    else:
                        break
            k = d - 2
            while k >= 0:
                idx[k] += 1
                if idx[k] <= hi_c[k]:
                    break
                idx[k] = lo_c[k]
                k -= 1
            if k < 0:
                break
    return counts_arr
