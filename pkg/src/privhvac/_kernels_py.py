"""Pure-Python fallbacks for the compiled numeric kernels.

These mirror privhvac._kernels exactly (same pivot rules, same arithmetic
order) so that both backends produce identical results.  The compiled
extension is built with FMA contraction disabled for the same reason.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

SIMPLEX_OPTIMAL = 0
SIMPLEX_UNBOUNDED = 1
SIMPLEX_ITER_LIMIT = 2


def simplex_iterate(tableau, basis, n_enter, tol, max_iter, bland_after):
    """Run primal simplex pivots in place until optimality.

    tableau: (m+1, n+1) array; objective (reduced costs) in the last row,
        right-hand side in the last column.
    basis: int64 array of length m, basic variable per row; updated in place.
    n_enter: only columns [0, n_enter) are eligible to enter.
    bland_after: switch from Dantzig to Bland's rule after this many pivots
        (anti-cycling safeguard).

    Returns (status, pivots).
    """
    T = tableau
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    pivots = 0
    while True:
        obj = T[m, :n_enter]
        if pivots >= bland_after:
            neg = np.flatnonzero(obj < -tol)
            if neg.size == 0:
                return SIMPLEX_OPTIMAL, pivots
            j = int(neg[0])
        else:
            j = int(np.argmin(obj))
            if obj[j] >= -tol:
                return SIMPLEX_OPTIMAL, pivots
        col = T[:m, j]
        r = -1
        best = np.inf
        best_var = -1
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, rhs] / col[i]
                if ratio < best or (ratio == best and basis[i] < best_var):
                    best = ratio
                    best_var = basis[i]
                    r = i
        if r < 0:
            return SIMPLEX_UNBOUNDED, pivots
        piv = T[r, j]
        T[r, :] /= piv
        prow = T[r, :]
        for i in range(m + 1):
            if i != r:
                f = T[i, j]
                if f != 0.0:
                    T[i, :] -= f * prow
        # clean the entering column exactly
        T[:, j] = 0.0
        T[r, j] = 1.0
        basis[r] = j
        pivots += 1
        if pivots >= max_iter:
            return SIMPLEX_ITER_LIMIT, pivots


def zone_fold(T0, m_dot, T_s, occupancy, q_ext, r_e, r_h,
              dt, cap, c_p, c_o, beta, eta_h, eta_c,
              T_a, T_out, T_low, T_high, out_temps):
    """Trapezoidal zone simulation with running cost and comfort violation.

    Writes the post-step temperature of each step into out_temps and returns
    (energy_cost, violation) where violation is the per-step comfort
    excursion integral in degC*step.
    """
    K = m_dot.shape[0]
    a = cap / dt
    T = T0
    energy = 0.0
    violation = 0.0
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
