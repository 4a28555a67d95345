# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled inner loops.  ``_pure`` holds the numpy twins; both sum in the
same order so results agree bit for bit."""
import numpy as np


def chord_sums(const double[::1] cum, const Py_ssize_t[::1] centers,
               const Py_ssize_t[::1] lead_offsets, const Py_ssize_t[::1] widths):
    """Ball sums from prefix sums along the last axis, one chord per lead offset."""
    cdef Py_ssize_t n = centers.shape[0]
    cdef Py_ssize_t m = lead_offsets.shape[0]
    cdef Py_ssize_t i, k, base
    cdef double acc
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(m):
                base = centers[i] + lead_offsets[k]
                acc = acc + (cum[base + widths[k] + 1] - cum[base - widths[k]])
            o[i] = acc
    return out


def correlate_rows(const double[:, ::1] rows, const double[::1] weights):
    cdef Py_ssize_t n_rows = rows.shape[0]
    cdef Py_ssize_t nw = weights.shape[0]
    cdef Py_ssize_t n_out = rows.shape[1] - nw + 1
    cdef Py_ssize_t r, j, k
    cdef double acc
    out = np.empty((n_rows, n_out))
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(n_rows):
            for j in range(n_out):
                acc = 0.0
                for k in range(nw):
                    acc = acc + weights[k] * rows[r, j + k]
                o[r, j] = acc
    return out
