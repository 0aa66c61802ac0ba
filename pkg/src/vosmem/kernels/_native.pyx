# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the dense read path.

Mirrors kernels._reference operation for operation; results agree with the
numpy backend to floating-point roundoff (summation order differs). Inner
loops accumulate over transposed operands so the compiler vectorizes along
the memory-location axis, and the fused read never materializes more than
one row of temporaries.
"""

import numpy as np

from libc.math cimport exp

from ..errors import DegenerateRowError


cdef void _similarity_row(const double[:, ::1] qk, const double[:, ::1] mkt,
                          Py_ssize_t i, double scale, double[::1] row) nogil:
    # row[j] = scale * sum_k qk[i, k] * mkt[k, j]
    cdef Py_ssize_t lm = mkt.shape[1]
    cdef Py_ssize_t ck = mkt.shape[0]
    cdef Py_ssize_t j, k
    cdef double q
    for j in range(lm):
        row[j] = 0.0
    for k in range(ck):
        q = qk[i, k]
        for j in range(lm):
            row[j] += q * mkt[k, j]
    if scale != 1.0:
        for j in range(lm):
            row[j] *= scale


def similarity(const double[:, ::1] query_keys,
               const double[:, ::1] memory_keys, double scale=1.0):
    cdef Py_ssize_t lq = query_keys.shape[0]
    cdef Py_ssize_t lm = memory_keys.shape[0]
    mkt_arr = np.ascontiguousarray(np.asarray(memory_keys).T)
    cdef const double[:, ::1] mkt = mkt_arr
    out_arr = np.empty((lq, lm), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(lq):
            _similarity_row(query_keys, mkt, i, scale, out[i])
    return out_arr


cdef void _softmax_row(double[::1] row) nogil:
    cdef Py_ssize_t n = row.shape[0]
    cdef Py_ssize_t j
    cdef double m = row[0]
    cdef double z = 0.0
    for j in range(1, n):
        if row[j] > m:
            m = row[j]
    for j in range(n):
        row[j] = exp(row[j] - m)
        z += row[j]
    for j in range(n):
        row[j] /= z


cdef int _rawsum_row(double[::1] row) nogil:
    # returns 1 when the row sum is not strictly positive
    cdef Py_ssize_t n = row.shape[0]
    cdef Py_ssize_t j
    cdef double z = 0.0
    for j in range(n):
        z += row[j]
    if z <= 0.0:
        return 1
    for j in range(n):
        row[j] /= z
    return 0


def normalize_rows(const double[:, ::1] sim, mode):
    cdef Py_ssize_t rows = sim.shape[0]
    cdef Py_ssize_t cols = sim.shape[1]
    out_arr = np.array(sim, dtype=np.float64, copy=True)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, bad = -1
    if mode == "softmax":
        with nogil:
            for i in range(rows):
                _softmax_row(out[i])
        return out_arr
    if mode == "raw_sum":
        with nogil:
            for i in range(rows):
                if _rawsum_row(out[i]):
                    bad = i
                    break
        if bad >= 0:
            raise DegenerateRowError(
                f"row {bad} has a non-positive sum; raw_sum needs strictly "
                "positive row sums")
        return out_arr
    raise ValueError(f"unknown normalization mode {mode!r}")


def read(const double[:, ::1] query_keys, const double[:, ::1] memory_keys,
         const double[:, ::1] memory_values, double scale=1.0,
         mode="softmax"):
    cdef Py_ssize_t lq = query_keys.shape[0]
    cdef Py_ssize_t lm = memory_keys.shape[0]
    cdef Py_ssize_t cv = memory_values.shape[1]
    cdef int use_softmax = 1 if mode == "softmax" else 0
    if not use_softmax and mode != "raw_sum":
        raise ValueError(f"unknown normalization mode {mode!r}")
    mkt_arr = np.ascontiguousarray(np.asarray(memory_keys).T)
    mvt_arr = np.ascontiguousarray(np.asarray(memory_values).T)
    cdef const double[:, ::1] mkt = mkt_arr
    cdef const double[:, ::1] mvt = mvt_arr
    weights_arr = np.empty((lq, lm), dtype=np.float64)
    retrieved_arr = np.empty((lq, cv), dtype=np.float64)
    cdef double[:, ::1] w = weights_arr
    cdef double[:, ::1] r = retrieved_arr
    cdef Py_ssize_t i, j, k, bad = -1
    cdef double acc
    with nogil:
        for i in range(lq):
            _similarity_row(query_keys, mkt, i, scale, w[i])
            if use_softmax:
                _softmax_row(w[i])
            elif _rawsum_row(w[i]):
                bad = i
                break
            for k in range(cv):
                acc = 0.0
                for j in range(lm):
                    acc += w[i, j] * mvt[k, j]
                r[i, k] = acc
    if bad >= 0:
        raise DegenerateRowError(
            f"row {bad} has a non-positive sum; raw_sum needs strictly "
            "positive row sums")
    return weights_arr, retrieved_arr
