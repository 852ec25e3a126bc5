# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled numeric kernels: dense simplex pivoting and the zone fold.

Mirrors privhvac._kernels_py operation for operation; compiled with
-ffp-contract=off so results are bit-identical to the fallback.
"""

import numpy as np

BACKEND = "compiled"

SIMPLEX_OPTIMAL = 0
SIMPLEX_UNBOUNDED = 1
SIMPLEX_ITER_LIMIT = 2

cdef double INF = float("inf")


def simplex_iterate(double[:, ::1] tableau, long long[::1] basis,
                    Py_ssize_t n_enter, double tol, long max_iter,
                    long bland_after):
    """Run primal simplex pivots in place; see the pure fallback for docs."""
    cdef Py_ssize_t m = tableau.shape[0] - 1
    cdef Py_ssize_t ncol = tableau.shape[1]
    cdef Py_ssize_t rhs = ncol - 1
    cdef long pivots = 0
    cdef Py_ssize_t i, j, jj, r
    cdef double best, ratio, piv, f, ov
    cdef long long best_var
    while True:
        if pivots >= bland_after:
            j = -1
            for jj in range(n_enter):
                if tableau[m, jj] < -tol:
                    j = jj
                    break
            if j < 0:
                return SIMPLEX_OPTIMAL, pivots
        else:
            j = 0
            ov = tableau[m, 0]
            for jj in range(1, n_enter):
                if tableau[m, jj] < ov:
                    ov = tableau[m, jj]
                    j = jj
            if ov >= -tol:
                return SIMPLEX_OPTIMAL, pivots
        r = -1
        best = INF
        best_var = -1
        for i in range(m):
            if tableau[i, j] > tol:
                ratio = tableau[i, rhs] / tableau[i, j]
                if ratio < best or (ratio == best and basis[i] < best_var):
                    best = ratio
                    best_var = basis[i]
                    r = i
        if r < 0:
            return SIMPLEX_UNBOUNDED, pivots
        piv = tableau[r, j]
        for jj in range(ncol):
            tableau[r, jj] /= piv
        for i in range(m + 1):
            if i != r:
                f = tableau[i, j]
                if f != 0.0:
                    for jj in range(ncol):
                        tableau[i, jj] -= f * tableau[r, jj]
        for i in range(m + 1):
            tableau[i, j] = 0.0
        tableau[r, j] = 1.0
        basis[r] = j
        pivots += 1
        if pivots >= max_iter:
            return SIMPLEX_ITER_LIMIT, pivots


def zone_fold(double T0, double[::1] m_dot, double[::1] T_s,
              double[::1] occupancy, double[::1] q_ext,
              double[::1] r_e, double[::1] r_h,
              double dt, double cap, double c_p, double c_o, double beta,
              double eta_h, double eta_c, double T_a, double T_out,
              double T_low, double T_high, double[::1] out_temps):
    """Trapezoidal zone simulation; see the pure fallback for docs."""
    cdef Py_ssize_t K = m_dot.shape[0]
    cdef double a = cap / dt
    cdef double T = T0
    cdef double energy = 0.0
    cdef double violation = 0.0
    cdef double h, p_fan, p_cool, p_heat
    cdef Py_ssize_t k
    for k in range(K):
        h = m_dot[k] * c_p
        T = T + (q_ext[k] + c_o * occupancy[k] + h * (T_s[k] - T)) / (a + 0.5 * h)
        out_temps[k] = T
        p_fan = beta * m_dot[k]
        p_cool = (c_p / eta_c) * m_dot[k] * (T_out - T_a)
        p_heat = (c_p / eta_h) * m_dot[k] * (T_s[k] - T_a)
        energy += (r_e[k] * (p_fan + p_cool) + r_h[k] * p_heat) * dt
        if T > T_high:
            violation += T - T_high
        elif T < T_low:
            violation += T_low - T
    return energy, violation
