"""Dense two-phase simplex over the selected pivot kernel.

Solves  min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

The pivot loop lives in privhvac.kernels (compiled or pure backend); this
module builds the standard-form tableau, runs phase 1 only when no trivial
basis exists, and extracts the solution.  Callers whose constraint matrix
contains a ready-made basic column for a negative-RHS row (the MPC comfort
rows and their penalty slacks) can pass `basis_hint` to skip phase 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    pivots: int


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *,
             tol: float = 1e-9, feas_tol: float = 1e-7,
             max_iter: int = 50_000, basis_hint=None) -> LpResult:
    """Two-phase primal simplex.  basis_hint maps inequality-row index to a
    variable index whose column is (-1 at that row, 0 elsewhere); such rows
    with negative RHS get that variable as the starting basis instead of an
    artificial."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    if A_ub.shape[1] != n or A_eq.shape[1] != n:
        raise ValueError("constraint matrix width does not match objective length")
    if b_ub.shape[0] != m_ub or b_eq.shape[0] != m_eq:
        raise ValueError("right-hand side length mismatch")

    if basis_hint is not None:
        basis_hint = np.asarray(basis_hint, dtype=np.int64)
        if basis_hint.shape[0] != m_ub:
            raise ValueError("basis_hint must have one entry per inequality row")
        _validate_hints(A_ub, A_eq, basis_hint)

    # rows = [A_ub | I_slack | artificials? ; A_eq | 0 | artificials?]
    n_slack = m_ub
    art_rows: list[int] = []
    body = np.zeros((m, n + n_slack))
    rhs = np.zeros(m)
    basis = np.full(m, -1, dtype=np.int64)
    body[:m_ub, :n] = A_ub
    body[:m_ub, n:n + n_slack] = np.eye(m_ub)
    rhs[:m_ub] = b_ub
    body[m_ub:, :n] = A_eq
    rhs[m_ub:] = b_eq

    for i in range(m_ub):
        if rhs[i] >= 0.0:
            basis[i] = n + i
        elif basis_hint is not None and basis_hint[i] >= 0:
            body[i, :] *= -1.0
            rhs[i] *= -1.0
            basis[i] = basis_hint[i]
        else:
            art_rows.append(i)
    for i in range(m_ub, m):
        if rhs[i] < 0.0:
            body[i, :] *= -1.0
            rhs[i] *= -1.0
        art_rows.append(i)

    n_art = len(art_rows)
    n_real = n + n_slack
    total = n_real + n_art
    tableau = np.zeros((m + 1, total + 1))
    tableau[:m, :n_real] = body
    tableau[:m, total] = rhs
    for a, i in enumerate(art_rows):
        if rhs[i] < 0.0:
            tableau[i, :] *= -1.0
        tableau[i, n_real + a] = 1.0
        basis[i] = n_real + a

    pivots_total = 0
    if n_art:
        # phase 1: minimise the artificial total
        tableau[m, :] = 0.0
        tableau[m, n_real:total] = 1.0
        for i in range(m):
            if basis[i] >= n_real:
                tableau[m, :] -= tableau[i, :]
        status, piv = kernels.simplex_iterate(
            tableau, basis, total, tol, max_iter, max_iter // 2)
        pivots_total += piv
        if status == kernels.SIMPLEX_ITER_LIMIT:
            return LpResult(ITERATION_LIMIT, None, None, pivots_total)
        phase1 = -tableau[m, total]
        if phase1 > feas_tol:
            return LpResult(INFEASIBLE, None, None, pivots_total)
        _expel_artificials(tableau, basis, n_real, tol)

    # phase 2 on the real columns only
    tableau[m, :] = 0.0
    tableau[m, :n] = c
    for i in range(m):
        j = basis[i]
        if 0 <= j < n and c[j] != 0.0:
            tableau[m, :] -= c[j] * tableau[i, :]
    status, piv = kernels.simplex_iterate(
        tableau, basis, n_real, tol, max_iter, max_iter // 2)
    pivots_total += piv
    if status == kernels.SIMPLEX_UNBOUNDED:
        return LpResult(UNBOUNDED, None, None, pivots_total)
    if status == kernels.SIMPLEX_ITER_LIMIT:
        return LpResult(ITERATION_LIMIT, None, None, pivots_total)

    x = np.zeros(n)
    for i in range(m):
        if 0 <= basis[i] < n:
            x[basis[i]] = tableau[i, total]
    np.clip(x, 0.0, None, out=x)
    return LpResult(OPTIMAL, x, float(c @ x), pivots_total)


def lp_feasible(A_ub=None, b_ub=None, A_eq=None, b_eq=None, *,
                tol: float = 1e-9, feas_tol: float = 1e-7) -> bool:
    """Phase-1 feasibility probe for the given constraint system."""
    n = (A_ub.shape[1] if A_ub is not None else A_eq.shape[1])
    res = solve_lp(np.zeros(n), A_ub, b_ub, A_eq, b_eq,
                   tol=tol, feas_tol=feas_tol)
    return res.status == OPTIMAL


def _validate_hints(A_ub, A_eq, basis_hint):
    for i, j in enumerate(basis_hint):
        if j < 0:
            continue
        if A_ub[i, j] != -1.0:
            raise ValueError(f"basis_hint for row {i} must have coefficient -1")
        col_ub = A_ub[:, j]
        if np.count_nonzero(col_ub) != 1 or (A_eq.shape[0] and np.any(A_eq[:, j])):
            raise ValueError(f"basis_hint column {j} must be local to row {i}")


def _expel_artificials(tableau, basis, n_real, tol):
    """Pivot zero-level artificials out of the basis; drop redundant rows by
    zeroing them (harmless to later pivoting)."""
    m = tableau.shape[0] - 1
    for i in range(m):
        if basis[i] < n_real:
            continue
        row = tableau[i, :n_real]
        cand = np.flatnonzero(np.abs(row) > tol)
        if cand.size == 0:
            tableau[i, :] = 0.0
            basis[i] = -1
            continue
        j = int(cand[0])
        piv = tableau[i, j]
        tableau[i, :] /= piv
        prow = tableau[i, :]
        for r in range(m + 1):
            if r != i:
                f = tableau[r, j]
                if f != 0.0:
                    tableau[r, :] -= f * prow
        tableau[:, j] = 0.0
        tableau[i, j] = 1.0
        basis[i] = j
