# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise kernels: Riesz double sums, Gagliardo sums, Holder ratios.

These are straight O(M^2) loops over point pairs.  Each has a pure-numpy
twin in ``_fallback.py`` with identical semantics; tests compare the two.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()


def riesz_double_sum(double[::1] values, double[:, ::1] coords,
                     double period, double beta, double diag_factor):
    """sum_{i!=j} v_i v_j |x_i-x_j|^-beta  +  diag_factor * sum_i v_i^2.

    Distances use the minimal image on a cube of side ``period``.
    """
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t i, j, a
    cdef double total = 0.0, diag = 0.0
    cdef double d, r2, half = 0.5 * period
    for i in range(m):
        diag += values[i] * values[i]
        for j in range(i + 1, m):
            r2 = 0.0
            for a in range(3):
                d = fabs(coords[i, a] - coords[j, a])
                if d > half:
                    d = period - d
                r2 += d * d
            total += 2.0 * values[i] * values[j] * pow(r2, -0.5 * beta)
    return total + diag_factor * diag


def gagliardo_double_sum(double[::1] values, double[:, ::1] coords,
                         double period, double gamma, double p):
    """sum_{i!=j} |v_i - v_j|^p / |x_i-x_j|^(3+gamma*p), minimal image."""
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t i, j, a
    cdef double total = 0.0
    cdef double d, r2, dv, half = 0.5 * period
    cdef double expo = -0.5 * (3.0 + gamma * p)
    for i in range(m):
        for j in range(i + 1, m):
            r2 = 0.0
            for a in range(3):
                d = fabs(coords[i, a] - coords[j, a])
                if d > half:
                    d = period - d
                r2 += d * d
            dv = fabs(values[i] - values[j])
            total += 2.0 * pow(dv, p) * pow(r2, expo)
    return total


def holder_max_ratio(double[::1] values, double[:, ::1] points,
                     double rho, double min_dist, double max_dist):
    """max over pairs of |v_i-v_j| / dist^rho, dist in (min_dist, max_dist].

    ``points`` holds space-time coordinates with time first (no wrapping);
    ``dist`` is |t_i-t_j| plus the Euclidean distance of the remaining
    coordinates.  Returns (best ratio, i, j) of the maximizing pair
    ((0.0, -1, -1) when no pair qualifies).
    """
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t ncol = points.shape[1]
    cdef Py_ssize_t i, j, a, ibest = -1, jbest = -1
    cdef double best = 0.0, r2, d, dist, ratio
    for i in range(m):
        for j in range(i + 1, m):
            r2 = 0.0
            for a in range(1, ncol):
                d = points[i, a] - points[j, a]
                r2 += d * d
            dist = fabs(points[i, 0] - points[j, 0]) + sqrt(r2)
            if dist <= min_dist or dist > max_dist:
                continue
            ratio = fabs(values[i] - values[j]) * pow(dist, -rho)
            if ratio > best:
                best = ratio
                ibest = i
                jbest = j
    return best, ibest, jbest
