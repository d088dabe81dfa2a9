# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled elliptope ascent kernel (see pyref.py for the reference)."""

import numpy as np

from libc.math cimport fabs, sqrt


cdef double _objective(double[:, ::1] band, Py_ssize_t c, double[:, ::1] v) nogil:
    cdef Py_ssize_t m = v.shape[0], r = v.shape[1]
    cdef Py_ssize_t i, j, t, lo, hi
    cdef double w, dot, total = 0.0
    for i in range(m):
        lo = i - c if i - c > 0 else 0
        hi = i + c + 1 if i + c + 1 < m else m
        for j in range(lo, hi):
            w = band[i, j - i + c]
            if w != 0.0:
                dot = 0.0
                for t in range(r):
                    dot += v[i, t] * v[j, t]
                total += w * dot
    return total


def ascent(double[:, ::1] band, Py_ssize_t half_bw, double[:, ::1] v,
           double tol, Py_ssize_t max_sweeps):
    cdef Py_ssize_t m = v.shape[0], r = v.shape[1]
    cdef Py_ssize_t c = half_bw
    cdef Py_ssize_t i, j, t, lo, hi, sweeps = 0
    cdef double w, norm, dot_old, gain, obj, scale, ratio, prev_gain
    cdef bint converged = False
    cdef double[::1] g = np.empty(r)

    obj = _objective(band, c, v)
    prev_gain = -1.0
    with nogil:
        while sweeps < max_sweeps:
            sweeps += 1
            gain = 0.0
            for i in range(m):
                lo = i - c if i - c > 0 else 0
                hi = i + c + 1 if i + c + 1 < m else m
                for t in range(r):
                    g[t] = 0.0
                for j in range(lo, hi):
                    if j == i:
                        continue
                    w = band[i, j - i + c]
                    if w != 0.0:
                        for t in range(r):
                            g[t] += w * v[j, t]
                norm = 0.0
                for t in range(r):
                    norm += g[t] * g[t]
                norm = sqrt(norm)
                if norm > 0.0:
                    dot_old = 0.0
                    for t in range(r):
                        dot_old += g[t] * v[i, t]
                    gain += 2.0 * (norm - dot_old)
                    scale = 1.0 / norm
                    for t in range(r):
                        v[i, t] = g[t] * scale
            obj += gain
            # geometric-tail stop: remaining gain ~ gain / (1 - ratio)
            if prev_gain > 0.0:
                ratio = gain / prev_gain
            elif prev_gain == 0.0:
                ratio = 0.9999
            else:
                ratio = 0.0
            if ratio < 0.0:
                ratio = 0.0
            if ratio > 0.9999:
                ratio = 0.9999
            if gain / (1.0 - ratio) <= tol * (1.0 if fabs(obj) < 1.0 else fabs(obj)):
                converged = True
                break
            prev_gain = gain
    return _objective(band, c, v), sweeps, converged
