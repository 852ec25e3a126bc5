"""Zone thermal dynamics, energy cost, and the receding-horizon controller.

A single well-mixed zone obeys
    C dT/dt = R.T + c_o V + m_dot c_p (T_s - T)
discretised by the trapezoidal rule.  The controller picks blocked
(m_dot, T_s) trajectories minimising supply-air conditioning cost subject to
a comfort band (soft, slack-penalised), flow bounds, and supply-temperature
bounds.  The bilinear products between flow and temperature are handled by
successive linearisation around the incumbent trajectory; each subproblem is
a dense LP solved by the embedded simplex.  Decision variables per block are
the flow deviation above its lower bound and the reheat flux
w = m_dot (T_s - T_a), which makes the energy cost exactly linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels, lp


@dataclass(frozen=True)
class ZoneThermalParams:
    """Thermal constants of one zone (kJ/K, kW, kJ/(kg K))."""

    C: float = 1000.0
    c_o: float = 0.1
    c_p: float = 1.0
    R_row: np.ndarray | None = None  # coefficients over (interior temps, T_out), kW/K

    def __post_init__(self):
        if self.C <= 0 or self.c_p <= 0:
            raise ValueError("C and c_p must be positive")
        if self.c_o < 0:
            raise ValueError("c_o must be nonnegative")
        if self.R_row is not None:
            object.__setattr__(self, "R_row", np.asarray(self.R_row, dtype=float))


@dataclass(frozen=True)
class HvacParams:
    """Air-handling constants: efficiencies, fan power, supply-air limits."""

    eta_h: float = 0.9
    eta_c: float = 4.0
    beta: float = 0.5
    T_a: float = 12.8
    T_h_max: float = 40.0
    m_min: float = 0.084
    m_max: float = 1.5
    T_out: float = 30.0

    def __post_init__(self):
        if self.eta_h <= 0 or self.eta_c <= 0:
            raise ValueError("efficiencies must be positive")
        if self.beta < 0:
            raise ValueError("fan coefficient must be nonnegative")
        if not 0 < self.m_min <= self.m_max:
            raise ValueError("need 0 < m_min <= m_max")
        if self.T_a > self.T_h_max:
            raise ValueError("supply-air bounds must satisfy T_a <= T_h_max")


@dataclass(frozen=True)
class ComfortBand:
    T_low: float = 24.0
    T_high: float = 26.0

    def __post_init__(self):
        if not self.T_low < self.T_high:
            raise ValueError("comfort band must have T_low < T_high")


@dataclass(frozen=True)
class Tariff:
    """Electricity and heating prices in $/kJ; scalars or per-step arrays."""

    r_e: float | np.ndarray = 1.5e-4
    r_h: float | np.ndarray = 5e-6

    def __post_init__(self):
        for name in ("r_e", "r_h"):
            v = getattr(self, name)
            arr = np.asarray(v, dtype=float)
            if np.any(arr < 0):
                raise ValueError("tariff rates must be nonnegative")
            if arr.ndim > 1:
                raise ValueError("tariff rates must be scalar or one-dimensional")
            object.__setattr__(self, name, arr if arr.ndim else float(arr))

    def series(self, n_steps: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Per-step rate arrays for steps [start, start + n_steps); array
        tariffs wrap around cyclically."""
        out = []
        for v in (self.r_e, self.r_h):
            if np.ndim(v) == 0:
                out.append(np.full(n_steps, float(v)))
            else:
                idx = (start + np.arange(n_steps)) % len(v)
                out.append(np.asarray(v, dtype=float)[idx])
        return out[0], out[1]


@dataclass(frozen=True)
class MpcProblem:
    zone: ZoneThermalParams = field(default_factory=ZoneThermalParams)
    hvac: HvacParams = field(default_factory=HvacParams)
    comfort: ComfortBand = field(default_factory=ComfortBand)
    tariff: Tariff = field(default_factory=Tariff)


@dataclass(frozen=True)
class MpcConfig:
    dt: float = 60.0
    horizon_steps: int = 120
    update_steps: int = 15
    block_steps: int = 15
    comfort_penalty: float = 10.0  # $ per degC*step of excursion
    convergence_tol: float = 1e-8
    max_linearizations: int = 30
    lp_tol: float = 1e-9
    lp_max_iter: int = 50_000

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon_steps < 1:
            raise ValueError("horizon must be at least one step")
        if not 1 <= self.update_steps <= self.horizon_steps:
            raise ValueError("update interval must fit inside the horizon")
        if self.block_steps < 1 or self.horizon_steps % self.block_steps != 0:
            raise ValueError("block length must divide the horizon")
        if self.comfort_penalty < 0:
            raise ValueError("comfort penalty must be nonnegative")


@dataclass(frozen=True)
class ControlSequence:
    """Per-step supply flow (kg/s) and supply temperature (degC)."""

    m_dot: np.ndarray
    T_s: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m_dot, dtype=float)
        t = np.asarray(self.T_s, dtype=float)
        if m.shape != t.shape or m.ndim != 1:
            raise ValueError("m_dot and T_s must be equal-length vectors")
        object.__setattr__(self, "m_dot", m)
        object.__setattr__(self, "T_s", t)

    def __len__(self) -> int:
        return int(self.m_dot.size)


@dataclass(frozen=True)
class TrajectoryResult:
    temperatures: np.ndarray  # length K + 1, starting at T_init
    energy_cost: float
    comfort_violation: float  # degC * step
    realized_cost: float      # energy + penalty * violation


@dataclass(frozen=True)
class MpcSolution:
    controls: ControlSequence
    planned_cost: float
    converged: bool
    iterations: int
    objective_history: tuple[float, ...]


def step_dynamics(T: float, m_dot: float, T_s: float, occupancy: float,
                  zone: ZoneThermalParams, dt: float, q_ext: float = 0.0) -> float:
    """One trapezoidal step of the zone temperature."""
    h = m_dot * zone.c_p
    denom = zone.C / dt + 0.5 * h
    if denom <= 0:
        raise ValueError("nonpositive dynamics denominator (unphysical parameters)")
    return T + (q_ext + zone.c_o * occupancy + h * (T_s - T)) / denom


def stage_cost(m_dot: float, T_s: float, hvac: HvacParams,
               r_e: float, r_h: float, dt: float, c_p: float = 1.0) -> float:
    """Energy cost of one step: fan power plus conditioning the supply air
    from outside temperature down to T_a and reheating it up to T_s."""
    p_fan = hvac.beta * m_dot
    p_cool = (c_p / hvac.eta_c) * m_dot * (hvac.T_out - hvac.T_a)
    p_heat = (c_p / hvac.eta_h) * m_dot * (T_s - hvac.T_a)
    return (r_e * (p_fan + p_cool) + r_h * p_heat) * dt


def simulate_trajectory(T_init: float, controls: ControlSequence, occupancy,
                        problem: MpcProblem, config: MpcConfig,
                        q_ext=0.0, tariff_start: int = 0) -> TrajectoryResult:
    """Roll the zone forward under the given controls and occupancy."""
    K = len(controls)
    if K == 0:
        return TrajectoryResult(np.array([T_init]), 0.0, 0.0, 0.0)
    occ = np.empty(K)
    occ[:] = np.asarray(occupancy, dtype=float)
    q = np.empty(K)
    q[:] = np.asarray(q_ext, dtype=float)
    r_e, r_h = problem.tariff.series(K, tariff_start)
    zone, hvac, band = problem.zone, problem.hvac, problem.comfort
    if zone.C / config.dt + 0.5 * min(controls.m_dot.min(), 0.0) * zone.c_p <= 0:
        raise ValueError("nonpositive dynamics denominator (unphysical parameters)")
    temps = np.empty(K + 1)
    temps[0] = T_init
    energy, violation = kernels.zone_fold(
        float(T_init),
        np.ascontiguousarray(controls.m_dot, dtype=np.float64),
        np.ascontiguousarray(controls.T_s, dtype=np.float64),
        occ, q,
        np.ascontiguousarray(r_e, dtype=np.float64),
        np.ascontiguousarray(r_h, dtype=np.float64),
        config.dt, zone.C, zone.c_p, zone.c_o, hvac.beta,
        hvac.eta_h, hvac.eta_c, hvac.T_a, hvac.T_out,
        band.T_low, band.T_high, temps[1:])
    realized = energy + config.comfort_penalty * violation
    return TrajectoryResult(temps, float(energy), float(violation), float(realized))


def solve_mpc(T_init: float, reported_occupancy: float, problem: MpcProblem,
              config: MpcConfig, q_ext: float = 0.0, tariff_start: int = 0,
              initial_controls: ControlSequence | None = None) -> MpcSolution:
    """Plan blocked controls over the horizon for the reported occupancy.

    Successive linearisation with monotone acceptance: each accepted iterate
    lowers (never raises) the true planned cost, evaluated by simulating the
    candidate controls through the exact discrete dynamics.  The linearised
    subproblem is nonconvex in origin, so cold solves are restarted from two
    incumbents (hold the initial temperature; ride minimum flow at the coil
    floor) and the better fixed point is kept; warm starts skip the restart.
    """
    K = config.horizon_steps
    if reported_occupancy < 0:
        raise ValueError("occupancy must be nonnegative")
    hvac = problem.hvac
    if initial_controls is not None and len(initial_controls) == K:
        starts = [_clip_controls(initial_controls.m_dot, initial_controls.T_s, hvac)]
    else:
        hold = min(max(T_init, hvac.T_a), hvac.T_h_max)
        starts = [ControlSequence(np.full(K, hvac.m_min), np.full(K, hold)),
                  ControlSequence(np.full(K, hvac.m_min), np.full(K, hvac.T_a))]
    evaluate = lambda ctrl: simulate_trajectory(
        T_init, ctrl, reported_occupancy, problem, config, q_ext, tariff_start)
    solutions = []
    for start in starts:
        traj = evaluate(start)
        controls, best = start, traj.realized_cost
        history = [best]
        converged = False
        n_lp = 0
        for _ in range(config.max_linearizations):
            res = _linearized_lp(T_init, reported_occupancy, traj.temperatures,
                                 problem, config, q_ext, tariff_start)
            n_lp += 1
            if res.status != lp.OPTIMAL:
                break
            cand = _controls_from_lp(res.x, problem.hvac, config)
            cand_traj = evaluate(cand)
            cand_cost = cand_traj.realized_cost
            if cand_cost <= best:
                improved = best - cand_cost > config.convergence_tol * max(1.0, abs(best))
                controls, traj, best = cand, cand_traj, cand_cost
                history.append(best)
                if improved:
                    continue
            converged = True
            break
        solutions.append(MpcSolution(controls, best, converged, n_lp, tuple(history)))
    return min(solutions, key=lambda s: s.planned_cost)


def closed_loop_simulate(plant, distortion, problem: MpcProblem, config: MpcConfig,
                         *, n_steps: int | None = None, rng=None,
                         T_init: float = 25.0, tariff_start: int = 0):
    """Receding-horizon control with reported occupancy on the plant.

    plant: FhmmModel (traces are sampled with rng) or a recorded
    OccupancySeries.  distortion: per-zone channel(s), a reporter object with
    .report(iteration, step, y_vec, rng), or None for truthful reports.
    At every update boundary the controller observes the reported counts,
    re-plans per zone, and the first update_steps controls are applied to the
    plant driven by the true per-step occupancy.
    """
    from .occupancy import FhmmModel, OccupancySeries, sample_traces, occupancy_from_traces
    from .distortion import as_reporter

    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if isinstance(plant, FhmmModel):
        if n_steps is None:
            raise ValueError("n_steps is required when sampling the plant model")
        traces = sample_traces(plant, n_steps, rng)
        series = occupancy_from_traces(traces, plant.zone_set)
    elif isinstance(plant, OccupancySeries):
        series = plant
        if n_steps is not None and n_steps != series.n_steps:
            raise ValueError("n_steps conflicts with the recorded series length")
    else:
        raise TypeError("plant must be an FhmmModel or an OccupancySeries")

    N = series.n_zones
    u = config.update_steps
    n_iter = series.n_steps // u
    if n_iter < 1:
        raise ValueError("simulation shorter than one update interval")
    reporter = as_reporter(distortion, N)

    temps = np.full(N, float(T_init))
    prev_solutions: list[MpcSolution | None] = [None] * N
    log = ClosedLoopLog.empty(n_iter, N, T_init)
    for i in range(n_iter):
        t0 = i * u
        y_vec = series.counts[t0].copy()
        v_vec = np.asarray(reporter.report(i, t0, y_vec, rng), dtype=np.int64)
        if v_vec.shape != (N,) or np.any(v_vec < 0):
            raise ValueError("reporter must return one nonnegative count per zone")
        q_vec = _coupling(problem.zone.R_row, temps, problem.hvac.T_out, N)
        for n in range(N):
            warm = _shifted_controls(prev_solutions[n], u)
            sol = solve_mpc(temps[n], float(v_vec[n]), problem, config,
                            q_ext=q_vec[n], tariff_start=tariff_start + t0,
                            initial_controls=warm)
            prev_solutions[n] = sol
            applied = ControlSequence(sol.controls.m_dot[:u], sol.controls.T_s[:u])
            traj = simulate_trajectory(temps[n], applied, series.counts[t0:t0 + u, n],
                                       problem, config, q_vec[n], tariff_start + t0)
            temps[n] = traj.temperatures[-1]
            log.fill(i, n, t0, temps[n], y_vec[n], v_vec[n],
                     applied.m_dot[0], applied.T_s[0],
                     traj.energy_cost, traj.comfort_violation)
    return log


@dataclass
class ClosedLoopLog:
    """Per-iteration, per-zone record of the closed loop."""

    T_init: float
    iteration: np.ndarray
    step: np.ndarray
    y: np.ndarray
    v: np.ndarray
    m_dot: np.ndarray
    T_s: np.ndarray
    T_end: np.ndarray
    energy: np.ndarray
    violation: np.ndarray

    @classmethod
    def empty(cls, n_iter: int, n_zones: int, T_init: float) -> "ClosedLoopLog":
        z = lambda dtype=float: np.zeros((n_iter, n_zones), dtype=dtype)
        return cls(float(T_init), np.arange(n_iter), np.zeros(n_iter, dtype=np.int64),
                   z(np.int64), z(np.int64), z(), z(), z(), z(), z())

    def fill(self, i, n, step, T_end, y, v, m_dot, T_s, energy, violation):
        self.step[i] = step
        self.y[i, n] = y
        self.v[i, n] = v
        self.m_dot[i, n] = m_dot
        self.T_s[i, n] = T_s
        self.T_end[i, n] = T_end
        self.energy[i, n] = energy
        self.violation[i, n] = violation

    @property
    def n_iterations(self) -> int:
        return int(self.iteration.size)

    @property
    def n_zones(self) -> int:
        return int(self.y.shape[1])

    def realized_cost(self, comfort_penalty: float) -> np.ndarray:
        """Per-iteration, per-zone realized cost in $."""
        return self.energy + comfort_penalty * self.violation


def _linearized_lp(T_init, occupancy, incumbent_temps, problem, config,
                   q_ext, tariff_start):
    """Build and solve the LP linearised around the incumbent trajectory."""
    zone, hvac = problem.zone, problem.hvac
    band = problem.comfort
    K = config.horizon_steps
    B = K // config.block_steps
    g_over_a = zone.c_p * config.dt / zone.C
    theta = 0.5 * (incumbent_temps[:-1] + incumbent_temps[1:])
    blk = np.arange(K) // config.block_steps

    # prefix-summed influence of each block on the temperature after step k+1
    coef_m = np.zeros((K, B))
    coef_w = np.zeros((K, B))
    acc_m = np.zeros(B)
    acc_w = np.zeros(B)
    drift = np.empty(K)
    base = (q_ext + zone.c_o * occupancy) * config.dt / zone.C
    run = 0.0
    for k in range(K):
        b = blk[k]
        acc_m[b] += g_over_a * (hvac.T_a - theta[k])
        acc_w[b] += g_over_a
        coef_m[k] = acc_m
        coef_w[k] = acc_w
        run += base
        drift[k] = run
    const = T_init + drift + hvac.m_min * coef_m.sum(axis=1)

    n_var = 2 * B + 2 * K
    i_w = B
    i_sp = 2 * B
    i_sm = 2 * B + K
    A = np.zeros((2 * K + 2 * B, n_var))
    b_ub = np.zeros(2 * K + 2 * B)
    hint = np.full(2 * K + 2 * B, -1, dtype=np.int64)
    A[:K, :B] = coef_m
    A[:K, i_w:i_w + B] = coef_w
    A[np.arange(K), i_sp + np.arange(K)] = -1.0
    b_ub[:K] = band.T_high - const
    hint[:K] = i_sp + np.arange(K)
    A[K:2 * K, :B] = -coef_m
    A[K:2 * K, i_w:i_w + B] = -coef_w
    A[K + np.arange(K), i_sm + np.arange(K)] = -1.0
    b_ub[K:2 * K] = const - band.T_low
    hint[K:2 * K] = i_sm + np.arange(K)
    r0 = 2 * K
    A[r0 + np.arange(B), np.arange(B)] = 1.0
    b_ub[r0:r0 + B] = hvac.m_max - hvac.m_min
    r1 = r0 + B
    span = hvac.T_h_max - hvac.T_a
    A[r1 + np.arange(B), i_w + np.arange(B)] = 1.0
    A[r1 + np.arange(B), np.arange(B)] = -span
    b_ub[r1:r1 + B] = span * hvac.m_min

    r_e, r_h = problem.tariff.series(K, tariff_start)
    c = np.zeros(n_var)
    flow_rate = config.dt * r_e * (hvac.beta + (zone.c_p / hvac.eta_c) * (hvac.T_out - hvac.T_a))
    heat_rate = config.dt * r_h * (zone.c_p / hvac.eta_h)
    np.add.at(c, blk, flow_rate)
    np.add.at(c, i_w + blk, heat_rate)
    c[i_sp:] = config.comfort_penalty
    return lp.solve_lp(c, A, b_ub, tol=config.lp_tol,
                       max_iter=config.lp_max_iter, basis_hint=hint)


def _controls_from_lp(x, hvac: HvacParams, config: MpcConfig) -> ControlSequence:
    B = config.horizon_steps // config.block_steps
    m_blk = np.clip(hvac.m_min + x[:B], hvac.m_min, hvac.m_max)
    w_blk = np.clip(x[B:2 * B], 0.0, None)
    ts_blk = np.clip(hvac.T_a + w_blk / m_blk, hvac.T_a, hvac.T_h_max)
    reps = config.block_steps
    return ControlSequence(np.repeat(m_blk, reps), np.repeat(ts_blk, reps))


def _clip_controls(m_dot, T_s, hvac: HvacParams) -> ControlSequence:
    return ControlSequence(np.clip(m_dot, hvac.m_min, hvac.m_max),
                           np.clip(T_s, hvac.T_a, hvac.T_h_max))


def _shifted_controls(solution: MpcSolution | None, u: int) -> ControlSequence | None:
    """Warm start: drop the applied window, repeat the tail value."""
    if solution is None:
        return None
    m, t = solution.controls.m_dot, solution.controls.T_s
    return ControlSequence(np.concatenate([m[u:], np.full(u, m[-1])]),
                           np.concatenate([t[u:], np.full(u, t[-1])]))


def _coupling(R_row, temps: np.ndarray, T_out: float, n_zones: int) -> np.ndarray:
    """Inter-zone heat flow from last known temperatures (kW per zone)."""
    if R_row is None:
        return np.zeros(n_zones)
    R_row = np.asarray(R_row, dtype=float)
    if R_row.shape != (n_zones + 1,):
        raise ValueError("R_row must have one coefficient per interior zone plus outside")
    q = float(R_row[:n_zones] @ temps + R_row[n_zones] * T_out)
    return np.full(n_zones, q)
