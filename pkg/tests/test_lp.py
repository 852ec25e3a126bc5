"""Two-phase simplex checked against scipy's independent LP solver."""

import numpy as np
import pytest
from scipy.optimize import linprog

from privhvac.lp import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
                         LpResult, lp_feasible, solve_lp)


def _random_feasible_lp(rng, m=8, n=6, with_eq=False):
    """LP built around a known interior point so it is feasible by design."""
    x0 = rng.uniform(0.5, 2.0, size=n)
    A_ub = rng.normal(size=(m, n))
    b_ub = A_ub @ x0 + rng.uniform(0.1, 2.0, size=m)
    A_ub = np.vstack([A_ub, np.ones((1, n))])
    b_ub = np.append(b_ub, x0.sum() + 5.0)  # bounded feasible set
    c = rng.normal(size=n)
    if with_eq:
        A_eq = rng.normal(size=(2, n))
        b_eq = A_eq @ x0
        return c, A_ub, b_ub, A_eq, b_eq
    return c, A_ub, b_ub, None, None


def _scipy(c, A_ub, b_ub, A_eq, b_eq):
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=(0, None), method="highs")


@pytest.mark.parametrize("with_eq", [False, True])
def test_objective_matches_scipy_on_random_instances(rng, with_eq):
    for _ in range(30):
        c, A_ub, b_ub, A_eq, b_eq = _random_feasible_lp(rng, with_eq=with_eq)
        ours = solve_lp(c, A_ub, b_ub, A_eq, b_eq)
        ref = _scipy(c, A_ub, b_ub, A_eq, b_eq)
        assert ours.status == OPTIMAL
        assert ref.status == 0
        assert abs(ours.objective - ref.fun) < 1e-6 * max(1.0, abs(ref.fun))
        # the reported point satisfies all constraints
        assert np.all(ours.x >= -1e-9)
        assert np.all(A_ub @ ours.x <= b_ub + 1e-7)
        if A_eq is not None:
            np.testing.assert_allclose(A_eq @ ours.x, b_eq, atol=1e-7)


def test_infeasible_detected(rng):
    # sum x <= -1 with x >= 0 has no solution
    c = np.ones(3)
    A_ub = np.ones((1, 3))
    b_ub = np.array([-1.0])
    ours = solve_lp(c, A_ub, b_ub)
    assert ours.status == INFEASIBLE
    assert _scipy(c, A_ub, b_ub, None, None).status == 2
    assert not lp_feasible(A_ub, b_ub)


def test_unbounded_detected():
    ours = solve_lp(np.array([-1.0, 0.0]))
    assert ours.status == UNBOUNDED


def test_equality_only_lp():
    # min x1 + x2 s.t. x1 + x2 = 2 -> objective 2
    res = solve_lp(np.array([1.0, 1.0]), A_eq=np.array([[1.0, 1.0]]),
                   b_eq=np.array([2.0]))
    assert res.status == OPTIMAL
    assert abs(res.objective - 2.0) < 1e-9


def test_negative_rhs_inequality_handled():
    # -x1 <= -3 means x1 >= 3; min x1 -> 3 (needs phase 1 or a hint)
    c = np.array([1.0, 0.0])
    A_ub = np.array([[-1.0, 0.0]])
    b_ub = np.array([-3.0])
    res = solve_lp(c, A_ub, b_ub)
    assert res.status == OPTIMAL
    assert abs(res.objective - 3.0) < 1e-9


def test_basis_hint_agrees_with_phase_one(rng):
    # rows of the form  a.x - s_i <= -r  where s_i has a ready-made column
    n, m = 4, 3
    c = np.append(rng.uniform(0.2, 1.0, n), np.full(m, 10.0))
    A_rows = []
    b = []
    hint = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        row = np.zeros(n + m)
        row[:n] = -rng.uniform(0.5, 1.5, n)
        row[n + i] = -1.0
        A_rows.append(row)
        b.append(-rng.uniform(1.0, 2.0))
        hint[i] = n + i
    A_ub = np.array(A_rows)
    b_ub = np.array(b)
    hinted = solve_lp(c, A_ub, b_ub, basis_hint=hint)
    plain = solve_lp(c, A_ub, b_ub)
    assert hinted.status == plain.status == OPTIMAL
    assert abs(hinted.objective - plain.objective) < 1e-8
    ref = _scipy(c, A_ub, b_ub, None, None)
    assert abs(hinted.objective - ref.fun) < 1e-7


def test_iteration_limit_reported():
    rng = np.random.default_rng(0)
    c, A_ub, b_ub, _, _ = _random_feasible_lp(rng)
    res = solve_lp(c, A_ub, b_ub, max_iter=1)
    assert res.status in (ITERATION_LIMIT, OPTIMAL)


def test_result_dataclass_shape():
    res = solve_lp(np.array([1.0]), A_ub=np.array([[1.0]]), b_ub=np.array([1.0]))
    assert isinstance(res, LpResult)
    assert res.pivots >= 0
