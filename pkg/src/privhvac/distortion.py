"""Occupancy-report distortion: information objective and mechanism design.

A distortion channel maps the true per-zone head count y in {0..M} to a
reported count v through a row-stochastic matrix P(v|y).  The designed
channel minimises the mutual information between true and reported counts
subject to linear control-performance constraints: for every (y, v) and
every pair of nearby initial temperatures, the expected realized-cost gap
and the expected end-temperature gap between "plan for v" and "plan for y"
(both executed under true y) stay below configured budgets.  The feasible
set is a product of per-row polytopes; the solver is conditional-gradient
(Frank-Wolfe) with per-row LP oracles and an exact line search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .thermal import ControlSequence, MpcConfig, MpcProblem, simulate_trajectory, solve_mpc

LN2 = math.log(2.0)
GRAD_CLIP = 1e-12
FEAS_RESIDUAL = 1e-8


class InfeasibleRowError(RuntimeError):
    """A per-row polytope is empty (reported via DesignResult, raised only on
    internal inconsistencies)."""


@dataclass(frozen=True)
class DistortionMatrix:
    """Row-stochastic report channel on counts {0..M}."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ValueError("channel must be square")
        if np.any(rows < 0):
            raise ValueError("channel entries must be nonnegative")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("channel rows must sum to 1")

    @property
    def m_max(self) -> int:
        return self.rows.shape[0] - 1


@dataclass(frozen=True)
class ConstraintTables:
    """Cost and temperature gap tables over (y, v, temperature pair)."""

    grid: np.ndarray                       # temperature grid (degC)
    pairs: tuple[tuple[int, int], ...]     # ordered index pairs into grid
    cost_diff: np.ndarray                  # (M+1, M+1, P) in $
    temp_diff: np.ndarray                  # (M+1, M+1, P) in degC, >= 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        cost = np.asarray(self.cost_diff, dtype=float)
        temp = np.asarray(self.temp_diff, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cost_diff", cost)
        object.__setattr__(self, "temp_diff", temp)
        object.__setattr__(self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs))
        P = len(self.pairs)
        if cost.shape != temp.shape or cost.ndim != 3 or cost.shape[0] != cost.shape[1]:
            raise ValueError("tables must be (M+1, M+1, pairs)")
        if cost.shape[2] != P:
            raise ValueError("table depth must match the pair list")
        if np.any(temp < 0):
            raise ValueError("temperature gaps must be nonnegative")

    @property
    def m_max(self) -> int:
        return self.cost_diff.shape[0] - 1

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class DesignConfig:
    delta: float = 0.01            # $ budget on expected cost gap
    delta_T: float = 1.0           # degC budget on expected end-temperature gap
    delta_T_prime: float | None = None  # pair spacing; defaults to delta_T
    temp_grid_step: float = 0.5
    fw_tolerance: float = 1e-6     # bits, on the Frank-Wolfe gap
    fw_max_iters: int = 10_000
    line_search: bool = True

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.delta_T <= 0 or self.temp_grid_step <= 0:
            raise ValueError("temperature budgets must be positive")
        if self.delta_T_prime is not None and self.delta_T_prime < 0:
            raise ValueError("pair spacing must be nonnegative")
        if self.fw_tolerance <= 0 or self.fw_max_iters < 1:
            raise ValueError("solver limits must be positive")

    @property
    def pair_spacing(self) -> float:
        return self.delta_T if self.delta_T_prime is None else self.delta_T_prime


@dataclass(frozen=True)
class DesignResult:
    channel: DistortionMatrix | None
    mi_bits: float
    fw_gap_bits: float
    feasible: bool
    iterations: int
    infeasible_row: int | None = None
    history_bits: tuple[float, ...] = ()


def mutual_information(p_y, rows) -> float:
    """I(Y; V) in bits for count law p_y and channel rows."""
    return _mi_nats(np.asarray(p_y, dtype=float), _rows_of(rows)) / LN2


def mi_gradient(p_y, rows) -> np.ndarray:
    """d I / d P(v|y) in nats: p(y) ln(P(v|y) / p(v)), entries clipped away
    from zero for interior evaluation.  Rows with p(y) = 0 get zero."""
    p_y = np.asarray(p_y, dtype=float)
    P = _rows_of(rows)
    p_v = p_y @ P
    ratio = np.clip(P, GRAD_CLIP, None) / np.clip(p_v, GRAD_CLIP, None)[None, :]
    g = p_y[:, None] * np.log(ratio)
    g[p_y <= 0.0, :] = 0.0
    return g


def identity_scheme(m_max: int) -> DistortionMatrix:
    return DistortionMatrix(np.eye(m_max + 1))


def uniform_scheme(m_max: int) -> DistortionMatrix:
    """Every report equally likely regardless of the true count."""
    row = _completed_row(np.full(m_max + 1, 1.0 / (m_max + 1)))
    return DistortionMatrix(np.tile(row, (m_max + 1, 1)))


def multinomial_scheme(accuracy: float, m_max: int) -> DistortionMatrix:
    """Report the truth with probability `accuracy`, otherwise split the
    remainder over the two nearest valid counts (mirrored at the edges)."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must lie in [0, 1]")
    if m_max < 2:
        raise ValueError("the multinomial scheme needs at least two occupants")
    side = (1.0 - accuracy) / 2.0
    rows = np.zeros((m_max + 1, m_max + 1))
    for y in range(m_max + 1):
        rows[y, y] = accuracy
        if y == 0:
            spill = (1, 2)
        elif y == m_max:
            spill = (m_max - 1, m_max - 2)
        else:
            spill = (y - 1, y + 1)
        rows[y, spill[0]] = side
        rows[y, spill[1]] = side
        rows[y] = _complete_at(rows[y], spill[1])
    return DistortionMatrix(rows)


def fixed_schedule_series(n_steps: int, m_max: int, dt: float,
                          start_hour: float = 0.0, start_weekday: int = 0,
                          work_start: float = 9.0, work_end: float = 17.0) -> np.ndarray:
    """Deterministic calendar reports: full occupancy during weekday working
    hours, zero otherwise.  Carries no information about the true counts."""
    hours = start_hour + np.arange(n_steps) * (dt / 3600.0)
    weekday = (start_weekday + np.floor(hours / 24.0).astype(np.int64)) % 7
    hour_of_day = np.mod(hours, 24.0)
    working = (weekday < 5) & (hour_of_day >= work_start) & (hour_of_day < work_end)
    return np.where(working, m_max, 0).astype(np.int64)


def apply_distortion(channel: DistortionMatrix, y: int, rng) -> int:
    """Sample a reported count for true count y."""
    if not 0 <= y <= channel.m_max:
        raise ValueError(f"count {y} outside the channel range 0..{channel.m_max}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    cum = np.cumsum(channel.rows[y])
    v = int(np.searchsorted(cum, rng.random(), side="right"))
    return min(v, channel.m_max)


def dpi_check(p_y, sensor_rows, design_rows) -> tuple[float, float]:
    """Leakage through a composed chain Y -> W -> V.

    Returns (I(Y;V), I(W;V)) in bits; data processing guarantees the first
    never exceeds the second.
    """
    p_y = np.asarray(p_y, dtype=float)
    Q = _rows_of(sensor_rows)
    D = _rows_of(design_rows)
    i_yv = _mi_nats(p_y, Q @ D) / LN2
    i_wv = _mi_nats(p_y @ Q, D) / LN2
    return i_yv, i_wv


def build_constraint_tables(problem: MpcProblem, mpc_config: MpcConfig,
                            design_config: DesignConfig, m_max: int) -> ConstraintTables:
    """Tabulate realized-cost and end-temperature gaps for every (y, v) and
    every ordered grid pair within the configured spacing.

    Entry (y, v, (t1, t2)) compares executing the plan made at temperature t1
    for reported count v against the plan made at t2 for the true count y,
    both simulated under true occupancy y over the applied interval.
    """
    band = problem.comfort
    step = design_config.temp_grid_step
    n_grid = int(round((band.T_high - band.T_low) / step)) + 1
    grid = band.T_low + step * np.arange(n_grid)
    spacing = design_config.pair_spacing
    pairs = tuple((i, j) for i in range(n_grid) for j in range(n_grid)
                  if abs(grid[i] - grid[j]) <= spacing + 1e-9)
    u = mpc_config.update_steps

    plans: dict[tuple[int, int], ControlSequence] = {}
    for ti in range(n_grid):
        for occ in range(m_max + 1):
            sol = solve_mpc(grid[ti], float(occ), problem, mpc_config)
            plans[ti, occ] = ControlSequence(sol.controls.m_dot[:u], sol.controls.T_s[:u])

    cost = np.zeros((n_grid, m_max + 1, m_max + 1))
    temp = np.zeros((n_grid, m_max + 1, m_max + 1))
    for ti in range(n_grid):
        for plan_occ in range(m_max + 1):
            for true_y in range(m_max + 1):
                traj = simulate_trajectory(grid[ti], plans[ti, plan_occ], float(true_y),
                                           problem, mpc_config)
                cost[ti, plan_occ, true_y] = traj.realized_cost
                temp[ti, plan_occ, true_y] = traj.temperatures[-1]

    P = len(pairs)
    cost_diff = np.zeros((m_max + 1, m_max + 1, P))
    temp_diff = np.zeros((m_max + 1, m_max + 1, P))
    for pi, (i1, i2) in enumerate(pairs):
        for y in range(m_max + 1):
            for v in range(m_max + 1):
                cost_diff[y, v, pi] = cost[i1, v, y] - cost[i2, y, y]
                temp_diff[y, v, pi] = abs(temp[i1, v, y] - temp[i2, y, y])
    return ConstraintTables(grid, pairs, cost_diff, temp_diff)


def row_constraint_system(tables: ConstraintTables, y: int, delta: float,
                          delta_T: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear system A q <= b for row y (cost rows then temperature rows)."""
    A = np.vstack([tables.cost_diff[y].T, tables.temp_diff[y].T])
    b = np.concatenate([np.full(tables.n_pairs, delta),
                        np.full(tables.n_pairs, delta_T)])
    return A, b


def row_feasible(tables: ConstraintTables, y: int, delta: float, delta_T: float) -> bool:
    A, b = row_constraint_system(tables, y, delta, delta_T)
    n = A.shape[1]
    return lp.lp_feasible(A, b, np.ones((1, n)), np.array([1.0]))


def row_minmax_cost(tables: ConstraintTables, y: int, delta_T: float) -> float | None:
    """Smallest worst-pair expected cost achievable by row y under its
    temperature constraints; None if even those are infeasible."""
    return _minmax_cost(tables, [y], delta_T)[0]


def common_row_minmax(tables: ConstraintTables, delta_T: float):
    """Best single row shared by every y: (worst-case expected cost, row),
    or (None, None) if the temperature constraints admit no common row."""
    ys = list(range(tables.m_max + 1))
    return _minmax_cost(tables, ys, delta_T)


def design_distortion(tables: ConstraintTables, p_y, config: DesignConfig,
                      delta: float | None = None, initial=None) -> DesignResult:
    """Minimise I(Y;V) over the product of per-row constraint polytopes.

    Infeasibility of any row polytope is reported (feasible=False with the
    offending row), not raised.  When a rows-identical channel is feasible it
    is returned directly: identical rows make the reports independent of the
    counts, so the objective hits its global minimum of zero.
    """
    p_y = np.asarray(p_y, dtype=float)
    n = tables.m_max + 1
    if p_y.shape != (n,):
        raise ValueError("count law must have one entry per count 0..M")
    if np.any(p_y < 0) or abs(p_y.sum() - 1.0) > 1e-9:
        raise ValueError("count law must be a distribution")
    if delta is None:
        delta = config.delta
    if delta < 0:
        raise ValueError("delta must be nonnegative")

    systems = [row_constraint_system(tables, y, delta, config.delta_T) for y in range(n)]
    for y, (A, b) in enumerate(systems):
        if not lp.lp_feasible(A, b, np.ones((1, n)), np.array([1.0])):
            return DesignResult(None, math.nan, math.nan, False, 0, infeasible_row=y)

    value, q_common = common_row_minmax(tables, config.delta_T)
    if value is not None and value <= delta + 1e-12:
        rows = np.tile(_completed_row(q_common), (n, 1))
        return DesignResult(DistortionMatrix(rows), 0.0, 0.0, True, 0,
                            history_bits=(0.0,))

    X = _initial_point(systems, p_y, n, initial)
    f = _mi_nats(p_y, X)
    history = [f / LN2]
    gap_bits = math.inf
    iters = 0
    for it in range(config.fw_max_iters):
        iters = it + 1
        G = mi_gradient(p_y, X)
        S = np.empty_like(X)
        for y, (A, b) in enumerate(systems):
            S[y] = _linear_oracle(G[y], A, b)
        gap = float(np.sum(G * (X - S)))
        gap_bits = gap / LN2
        if gap_bits <= config.fw_tolerance:
            break
        D = S - X
        if config.line_search:
            gamma = _exact_line_search(p_y, X, D)
        else:
            gamma = 2.0 / (it + 2.0)
        accepted = False
        for _ in range(40):
            cand = X + gamma * D
            f_cand = _mi_nats(p_y, cand)
            if f_cand <= f:
                X, f = cand, f_cand
                history.append(f / LN2)
                accepted = True
                break
            gamma *= 0.5
        if not accepted:
            break

    rows = np.clip(X, 0.0, None)
    rows /= rows.sum(axis=1, keepdims=True)
    _check_residual(systems, rows)
    mi_bits = _mi_nats(p_y, rows) / LN2
    return DesignResult(DistortionMatrix(rows), mi_bits, gap_bits, True, iters,
                        history_bits=tuple(history))


class TruthfulReporter:
    """Reports the true counts unchanged."""

    def report(self, iteration, step, y_vec, rng):
        return np.asarray(y_vec, dtype=np.int64)


class ChannelReporter:
    """Samples each zone's report through its distortion channel."""

    def __init__(self, channels):
        self.channels = list(channels)

    def report(self, iteration, step, y_vec, rng):
        return np.array([apply_distortion(ch, int(y), rng)
                         for ch, y in zip(self.channels, y_vec)], dtype=np.int64)


class ScheduleReporter:
    """Reports a fixed calendar value in every zone, ignoring the truth."""

    def __init__(self, m_max: int, dt: float, start_hour: float = 0.0,
                 start_weekday: int = 0, work_start: float = 9.0,
                 work_end: float = 17.0):
        self.m_max = m_max
        self.dt = dt
        self.start_hour = start_hour
        self.start_weekday = start_weekday
        self.work_start = work_start
        self.work_end = work_end

    def report(self, iteration, step, y_vec, rng):
        val = fixed_schedule_series(1, self.m_max, self.dt,
                                    self.start_hour + step * self.dt / 3600.0,
                                    self.start_weekday, self.work_start,
                                    self.work_end)[0]
        return np.full(len(y_vec), val, dtype=np.int64)


def as_reporter(distortion, n_zones: int):
    """Coerce channel input to a reporter: None (truthful), one channel for
    all zones, a per-zone sequence, or a ready-made reporter."""
    if distortion is None:
        return TruthfulReporter()
    if hasattr(distortion, "report"):
        return distortion
    if isinstance(distortion, DistortionMatrix):
        return ChannelReporter([distortion] * n_zones)
    items = list(distortion)
    if len(items) != n_zones:
        raise ValueError(f"need one channel per zone ({n_zones}), got {len(items)}")
    return ChannelReporter([it if isinstance(it, DistortionMatrix) else DistortionMatrix(it)
                            for it in items])


def _mi_nats(p_y: np.ndarray, rows: np.ndarray) -> float:
    p_v = p_y @ rows
    mask_y = p_y > 0.0
    total = 0.0
    P = rows[mask_y]
    w = p_y[mask_y]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(P > 0.0, P / np.where(p_v > 0.0, p_v, 1.0)[None, :], 1.0)
        terms = np.where(P > 0.0, P * np.log(ratio), 0.0)
    return max(float(w @ terms.sum(axis=1)), 0.0)


def _rows_of(rows) -> np.ndarray:
    if isinstance(rows, DistortionMatrix):
        return rows.rows
    return np.asarray(rows, dtype=float)


def _completed_row(q: np.ndarray) -> np.ndarray:
    """Return q with its largest entry recomputed so the row sums to 1
    exactly under compensated summation."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, None)
    return _complete_at(q, int(np.argmax(q)))


def _complete_at(q: np.ndarray, idx: int) -> np.ndarray:
    out = np.array(q, dtype=float)
    others = math.fsum(out[j] for j in range(out.size) if j != idx)
    out[idx] = max(1.0 - others, 0.0)
    return out


def _minmax_cost(tables: ConstraintTables, ys, delta_T: float):
    """min over rows q of max over (y in ys, pair) of expected cost, subject
    to the temperature rows of every y in ys.  Returns (value, q)."""
    n = tables.m_max + 1
    # variables: q (n), t_pos, t_neg
    cost_rows = np.vstack([tables.cost_diff[y].T for y in ys])
    temp_rows = np.vstack([tables.temp_diff[y].T for y in ys])
    m_cost = cost_rows.shape[0]
    A = np.zeros((m_cost + temp_rows.shape[0], n + 2))
    A[:m_cost, :n] = cost_rows
    A[:m_cost, n] = -1.0
    A[:m_cost, n + 1] = 1.0
    A[m_cost:, :n] = temp_rows
    b = np.concatenate([np.zeros(m_cost), np.full(temp_rows.shape[0], delta_T)])
    A_eq = np.zeros((1, n + 2))
    A_eq[0, :n] = 1.0
    c = np.zeros(n + 2)
    c[n] = 1.0
    c[n + 1] = -1.0
    res = lp.solve_lp(c, A, b, A_eq, np.array([1.0]))
    if res.status != lp.OPTIMAL:
        return None, None
    return float(res.objective), res.x[:n]


def _initial_point(systems, p_y: np.ndarray, n: int, initial) -> np.ndarray:
    if initial is not None:
        X = _rows_of(initial).copy()
        if X.shape == (n, n) and _max_residual(systems, X) <= 1e-7:
            return X
    X = np.empty((n, n))
    for y, (A, b) in enumerate(systems):
        e = np.zeros(n)
        e[y] = 1.0
        if np.all(A @ e <= b + 1e-12):
            X[y] = e
            continue
        res = lp.solve_lp(np.zeros(n), A, b, np.ones((1, n)), np.array([1.0]))
        if res.status != lp.OPTIMAL:
            raise InfeasibleRowError(f"row {y} lost feasibility during initialisation")
        X[y] = np.clip(res.x, 0.0, None)
        X[y] /= X[y].sum()
    return X


def _linear_oracle(g: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = g.size
    res = lp.solve_lp(g, A, b, np.ones((1, n)), np.array([1.0]))
    if res.status != lp.OPTIMAL:
        raise InfeasibleRowError("linear minimisation oracle failed on a feasible row")
    return res.x


def _exact_line_search(p_y, X, D, iters: int = 60) -> float:
    """Bisect the directional derivative of the convex objective on [0, 1]."""
    def slope(gamma: float) -> float:
        return float(np.sum(mi_gradient(p_y, X + gamma * D) * D))

    if slope(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _max_residual(systems, rows: np.ndarray) -> float:
    worst = 0.0
    for y, (A, b) in enumerate(systems):
        res = A @ rows[y] - b
        if res.size:
            worst = max(worst, float(res.max()))
        worst = max(worst, abs(float(rows[y].sum()) - 1.0))
    return worst


def _check_residual(systems, rows: np.ndarray):
    worst = _max_residual(systems, rows)
    if worst > FEAS_RESIDUAL:
        raise InfeasibleRowError(
            f"designed channel violates its constraints by {worst:.3e}")
