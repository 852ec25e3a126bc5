"""Monte-Carlo experiment driver: privacy-budget sweeps, reporting-scheme
comparisons, attack baselines, and scaled synthetic worlds.

Every experiment derives its random streams from a master seed through
labelled, hash-stable children, so results are bit-reproducible and paired
runs (truthful vs distorted reporting of the same world realisation) see
identical occupancy streams by construction.
"""

from __future__ import annotations

import dataclasses
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adversary import (AttackConfig, constant_outside_attack, inference_accuracy,
                        map_infer_beam)
from .distortion import (ConstraintTables, DesignConfig, DesignResult,
                         DistortionMatrix, ScheduleReporter, build_constraint_tables,
                         common_row_minmax, design_distortion, identity_scheme,
                         multinomial_scheme, mutual_information, row_minmax_cost,
                         uniform_scheme)
from .occupancy import (FhmmModel, LocationTrace, OccupancySeries,
                        occupancy_from_traces, occupancy_marginal, sample_traces)
from .thermal import MpcConfig, MpcProblem, closed_loop_simulate

DEFAULT_RUNS = 10
DEFAULT_SWEEP_POINTS = 8
DEFAULT_INTERVALS = 16  # closed-loop length in control-update intervals


class SweepError(RuntimeError):
    """A Monte-Carlo cell failed; carries the sweep position."""

    def __init__(self, message: str, delta_index: int | None = None,
                 run_index: int | None = None):
        super().__init__(message)
        self.delta_index = delta_index
        self.run_index = run_index


@dataclass(frozen=True)
class TradeoffRecord:
    """One privacy budget's aggregated Monte-Carlo outcome."""

    delta: float
    mi_bits: float
    realized_cost_diff_mean: float
    realized_cost_diff_std: float
    accuracy_mean: float
    accuracy_std: float
    feasible: bool
    runs: int

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("each record must describe at least one run")
        for s in (self.realized_cost_diff_std, self.accuracy_std):
            if np.isfinite(s) and s < 0:
                raise ValueError("standard deviations must be nonnegative")


@dataclass(frozen=True)
class SchemeComparison:
    """One reporting scheme's exact MI and Monte-Carlo cost/accuracy."""

    scheme: str
    mi_bits: float
    mean_cost: float
    cost_std: float
    mean_accuracy: float
    accuracy_std: float
    runs: int
    pareto: bool

    def __post_init__(self):
        if self.mean_cost < 0 or self.cost_std < 0 or self.accuracy_std < 0:
            raise ValueError("costs and deviations must be nonnegative")


def label_seed(seed: int, *labels) -> np.random.SeedSequence:
    """Deterministic named child stream of a master seed.

    Labels are hashed (not relied on for their Python hash), so the derived
    stream is stable across processes and interpreter versions.
    """
    if int(seed) < 0:
        raise ValueError("master seed must be nonnegative")
    words = [int.from_bytes(hashlib.sha256(str(l).encode("utf-8")).digest()[:8],
                            "little") for l in labels]
    return np.random.SeedSequence([int(seed)] + words)


def derive_rng(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(label_seed(seed, *labels))


def default_count_law(source, m_max: int | None = None) -> np.ndarray:
    """Count distribution the channel designer optimises against.

    For a model: the stationary per-zone count laws averaged over zones (the
    law of the count in a uniformly chosen zone).  For recorded counts: the
    empirical histogram over all (step, zone) cells.
    """
    if isinstance(source, FhmmModel):
        return occupancy_marginal(source).pmfs.mean(axis=0)
    if isinstance(source, OccupancySeries):
        if m_max is None:
            raise ValueError("m_max is required for an empirical count law")
        counts = source.counts.ravel()
        if counts.size == 0:
            raise ValueError("empty series has no count law")
        if counts.max() > m_max:
            raise ValueError("recorded counts exceed the stated occupant total")
        hist = np.bincount(counts, minlength=m_max + 1).astype(float)
        return hist / hist.sum()
    raise TypeError("count law source must be a model or an occupancy series")


def auto_bracket_deltas(tables: ConstraintTables, design_config: DesignConfig,
                        n_points: int = DEFAULT_SWEEP_POINTS,
                        low_factor: float = 1.05,
                        high_factor: float = 1.2) -> np.ndarray:
    """Geometric budget grid from just-feasible to independence-forcing.

    The low end sits just above the largest per-row min-max cost (below it
    some row has no feasible report law); the high end sits just above the
    best rows-identical channel's worst-case cost (beyond it the designed
    mechanism can make reports independent of the counts).
    """
    if n_points < 1:
        raise ValueError("need at least one sweep point")
    dT = design_config.delta_T
    lows = []
    for y in range(tables.m_max + 1):
        v = row_minmax_cost(tables, y, dT)
        if v is None:
            raise SweepError(
                f"temperature constraints alone are infeasible for count {y}")
        lows.append(v)
    low = max(lows) * low_factor
    common_value, _ = common_row_minmax(tables, dT)
    high = common_value * high_factor if common_value is not None else None
    if high is None or high <= 0:
        high = max(low, 1e-6) * 64.0
    if low <= 0:
        low = min(1e-6, high / 100.0)
    if high <= low:
        high = low * 4.0
    return np.geomspace(low, high, n_points)


def design_sweep(tables: ConstraintTables, p_y, deltas,
                 config: DesignConfig) -> list[DesignResult]:
    """Design the channel at each budget, warm-starting each solve from the
    previous (smaller-budget) solution.

    A smaller budget's feasible channel stays feasible when the budget grows,
    and the solver only ever improves on its starting point, so the designed
    MI is non-increasing along an ascending budget grid by construction; the
    carried-forward guard below makes that exact even under the final
    renormalisation's rounding.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        raise ValueError("budget grid must be nonempty")
    if np.any(np.diff(deltas) <= 0):
        raise ValueError("budget grid must be strictly ascending")
    results: list[DesignResult] = []
    prev: DesignResult | None = None
    for d in deltas:
        res = design_distortion(tables, p_y, config, delta=float(d),
                                initial=None if prev is None else prev.channel)
        if prev is not None and res.feasible and res.mi_bits > prev.mi_bits:
            res = dataclasses.replace(res, channel=prev.channel,
                                      mi_bits=prev.mi_bits)
        results.append(res)
        if res.feasible:
            prev = res
    return results


def run_tradeoff_sweep(world, problem: MpcProblem, deltas=None,
                       runs: int = DEFAULT_RUNS, seed: int = 0, *,
                       model: FhmmModel | None = None,
                       mpc_config: MpcConfig | None = None,
                       design_config: DesignConfig | None = None,
                       tables: ConstraintTables | None = None,
                       p_y=None, n_steps: int | None = None,
                       T_init: float = 25.0,
                       attack_config: AttackConfig | None = None,
                       n_points: int = DEFAULT_SWEEP_POINTS,
                       max_workers: int | None = None) -> list[TradeoffRecord]:
    """Privacy-utility tradeoff sweep over control-cost budgets.

    For every budget: design the channel against cached constraint tables,
    run `runs` closed-loop simulations reporting through it, pair each with a
    truthful-reporting simulation of the same occupancy realisation, and
    attack every distorted report log.  Infeasible budgets yield records with
    feasible=False and NaN statistics.  Cells may execute in parallel;
    aggregation order is fixed by (budget index, run index) either way.
    """
    if runs < 1:
        raise ValueError("need at least one Monte-Carlo run")
    model, fixed_traces = _resolve_world(world, model)
    mpc_config = mpc_config or MpcConfig()
    design_config = design_config or DesignConfig()
    attack_config = attack_config or AttackConfig()
    M = model.n_occupants
    u = mpc_config.update_steps

    if tables is None:
        tables = build_constraint_tables(problem, mpc_config, design_config, M)
    if deltas is None:
        deltas = auto_bracket_deltas(tables, design_config, n_points)
    deltas = np.asarray(deltas, dtype=float)
    results = design_sweep(tables, p_y if p_y is not None
                           else default_count_law(model), deltas, design_config)

    worlds = [_world_realisation(model, fixed_traces, n_steps, u, seed, r)
              for r in range(runs)]
    identity_logs = []
    for r, (series, _) in enumerate(worlds):
        try:
            identity_logs.append(closed_loop_simulate(
                series, None, problem, mpc_config, T_init=T_init,
                rng=derive_rng(seed, "truthful", r)))
        except Exception as exc:
            raise SweepError(f"truthful run {r} failed: {exc}",
                             run_index=r) from exc
    penalty = mpc_config.comfort_penalty
    identity_costs = [log.realized_cost(penalty) for log in identity_logs]
    model_u = model.at_cadence(u)

    cells = []
    for d, res in enumerate(results):
        if not res.feasible:
            continue
        for r, (series, truth) in enumerate(worlds):
            cells.append((d, r, _CellPayload(
                series.counts, res.channel.rows, model_u, problem, mpc_config,
                T_init, int(label_seed(seed, "report", d, r).generate_state(1)[0]),
                attack_config, truth, identity_logs[r].y, identity_costs[r])))

    outcomes: dict[tuple[int, int], tuple[float, float]] = {}
    if max_workers is not None and max_workers > 1 and cells:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            for (d, r), out in zip([(d, r) for d, r, _ in cells],
                                   pool.map(_sweep_cell, [p for _, _, p in cells])):
                outcomes[(d, r)] = _unwrap_cell(out, d, r)
    else:
        for d, r, payload in cells:
            outcomes[(d, r)] = _unwrap_cell(_sweep_cell(payload), d, r)

    records = []
    for d, res in enumerate(results):
        delta = float(deltas[d])
        if not res.feasible:
            records.append(TradeoffRecord(delta, float("nan"), float("nan"),
                                          float("nan"), float("nan"),
                                          float("nan"), False, runs))
            continue
        diffs = np.array([outcomes[(d, r)][0] for r in range(runs)])
        accs = np.array([outcomes[(d, r)][1] for r in range(runs)])
        records.append(TradeoffRecord(
            delta, res.mi_bits, float(diffs.mean()), _spread(diffs),
            float(accs.mean()), _spread(accs), True, runs))
    return records


def attack_baselines(world, problem: MpcProblem, runs: int = DEFAULT_RUNS,
                     seed: int = 0, *, model: FhmmModel | None = None,
                     mpc_config: MpcConfig | None = None,
                     n_steps: int | None = None,
                     attack_config: AttackConfig | None = None) -> dict[str, float]:
    """Reference attack accuracies on the same world realisations a sweep
    with this seed uses: the clean-data attack (truthful reports) and the
    constant-outside guesser."""
    if runs < 1:
        raise ValueError("need at least one Monte-Carlo run")
    model, fixed_traces = _resolve_world(world, model)
    mpc_config = mpc_config or MpcConfig()
    attack_config = attack_config or AttackConfig()
    u = mpc_config.update_steps
    model_u = model.at_cadence(u)
    ident = identity_scheme(model.n_occupants)
    clean, outside = [], []
    for r in range(runs):
        series, truth = _world_realisation(model, fixed_traces, n_steps, u, seed, r)
        reported = series.counts[::u][:len(truth[0])]
        clean.append(inference_accuracy(
            map_infer_beam(reported, model_u, ident, attack_config).traces, truth))
        outside.append(inference_accuracy(
            constant_outside_attack(reported, model_u, ident).traces, truth))
    clean, outside = np.array(clean), np.array(outside)
    return {"clean_mean": float(clean.mean()), "clean_std": _spread(clean),
            "outside_mean": float(outside.mean()), "outside_std": _spread(outside)}


def compare_schemes(world, problem: MpcProblem, schemes, runs: int = DEFAULT_RUNS,
                    seed: int = 0, *, model: FhmmModel | None = None,
                    mpc_config: MpcConfig | None = None,
                    design_config: DesignConfig | None = None,
                    tables: ConstraintTables | None = None,
                    p_y=None, n_steps: int | None = None,
                    T_init: float = 25.0,
                    attack_config: AttackConfig | None = None) -> list[SchemeComparison]:
    """Evaluate reporting schemes on shared world realisations.

    Schemes: "identity", "uniform", ("multinomial", accuracy),
    ("optimal", budget), "fixed-schedule".  MI is exact (from the channel and
    the count law; the fixed schedule carries no count information, so 0);
    cost and attack accuracy are Monte-Carlo means over paired runs.  Pareto
    flags mark schemes undominated in (MI, mean cost), both minimised.
    """
    schemes = list(schemes)
    if not schemes:
        raise ValueError("need at least one scheme")
    if runs < 1:
        raise ValueError("need at least one Monte-Carlo run")
    model, fixed_traces = _resolve_world(world, model)
    mpc_config = mpc_config or MpcConfig()
    design_config = design_config or DesignConfig()
    attack_config = attack_config or AttackConfig()
    M = model.n_occupants
    u = mpc_config.update_steps
    if p_y is None:
        p_y = default_count_law(model)
    needs_tables = any(_scheme_kind(s)[0] == "optimal" for s in schemes)
    if needs_tables and tables is None:
        tables = build_constraint_tables(problem, mpc_config, design_config, M)

    resolved = [_resolve_scheme(s, tables, p_y, design_config, M, mpc_config)
                for s in schemes]
    worlds = [_world_realisation(model, fixed_traces, n_steps, u, seed, r)
              for r in range(runs)]
    model_u = model.at_cadence(u)
    penalty = mpc_config.comfort_penalty

    rows_out = []
    for name, reporter, mi, attack_channel in resolved:
        costs, accs = [], []
        for r, (series, truth) in enumerate(worlds):
            rng = derive_rng(seed, "scheme", name, r)
            log = closed_loop_simulate(series, reporter, problem, mpc_config,
                                       T_init=T_init, rng=rng)
            costs.append(float(log.realized_cost(penalty).sum()))
            res = map_infer_beam(log.v, model_u, attack_channel, attack_config)
            accs.append(inference_accuracy(res.traces, truth))
        costs, accs = np.array(costs), np.array(accs)
        rows_out.append([name, mi, float(costs.mean()), _spread(costs),
                         float(accs.mean()), _spread(accs)])

    flags = _pareto_flags([(row[1], row[2]) for row in rows_out])
    return [SchemeComparison(name, mi, cost, cost_sd, acc, acc_sd, runs, flag)
            for (name, mi, cost, cost_sd, acc, acc_sd), flag
            in zip(rows_out, flags)]


def calibrate_delta_to_mi(tables: ConstraintTables, p_y, target_bits: float,
                          config: DesignConfig, low: float, high: float,
                          tol_bits: float = 0.05, max_iters: int = 40,
                          initial: DistortionMatrix | None = None
                          ) -> tuple[float, DesignResult]:
    """Budget whose designed channel has MI within tol of a target, found by
    bisection (designed MI is non-increasing in the budget).  An `initial`
    channel feasible at the lower bracket warm-starts every probe."""
    lo, hi = float(low), float(high)
    res_lo = design_distortion(tables, p_y, config, delta=lo, initial=initial)
    if not res_lo.feasible:
        raise ValueError("lower bracket budget is infeasible")
    if abs(res_lo.mi_bits - target_bits) <= tol_bits:
        return lo, res_lo
    warm = res_lo.channel
    res_hi = design_distortion(tables, p_y, config, delta=hi, initial=warm)
    if abs(res_hi.mi_bits - target_bits) <= tol_bits:
        return hi, res_hi
    if not (res_hi.mi_bits <= target_bits <= res_lo.mi_bits):
        raise ValueError("target MI is outside the bracketed range")
    for _ in range(max_iters):
        mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        res = design_distortion(tables, p_y, config, delta=float(mid),
                                initial=warm)
        if res.feasible and abs(res.mi_bits - target_bits) <= tol_bits:
            return float(mid), res
        if not res.feasible or res.mi_bits > target_bits:
            lo = mid
            if res.feasible:
                warm = res.channel
        else:
            hi = mid
    raise ValueError("budget calibration did not reach the MI target")


def synthesize_scaled_world(base: FhmmModel, occupants: int, seed: int) -> FhmmModel:
    """Larger synthetic world built by drawing occupant mobility profiles
    (transition matrix and start law together) from the base model with
    replacement; deterministic under the seed."""
    if occupants < 1:
        raise ValueError("need at least one occupant")
    if base.n_occupants < 1:
        raise ValueError("base model has no occupant profiles")
    rng = derive_rng(seed, "scaled-world")
    idx = rng.integers(0, base.n_occupants, size=occupants)
    chains = tuple(base.chains[i] for i in idx)
    initial = base.initial[idx].copy()
    names = tuple(f"occ{k + 1}" for k in range(occupants))
    return FhmmModel(base.zone_set, chains, initial, names)


# ---------------------------------------------------------------------------
# internals


@dataclass(frozen=True)
class _CellPayload:
    counts: np.ndarray
    channel_rows: np.ndarray
    model_u: FhmmModel
    problem: MpcProblem
    mpc_config: MpcConfig
    T_init: float
    report_seed: int
    attack_config: AttackConfig
    truth: tuple
    identity_y: np.ndarray
    identity_cost: np.ndarray


def _sweep_cell(payload: _CellPayload):
    """One (budget, run) Monte-Carlo cell; returns stats or the error."""
    try:
        channel = DistortionMatrix(payload.channel_rows)
        log = closed_loop_simulate(OccupancySeries(payload.counts), channel,
                                   payload.problem, payload.mpc_config,
                                   T_init=payload.T_init,
                                   rng=np.random.default_rng(payload.report_seed))
        if not np.array_equal(log.y, payload.identity_y):
            raise AssertionError("paired runs diverged on the true occupancy")
        diff = log.realized_cost(payload.mpc_config.comfort_penalty) - payload.identity_cost
        res = map_infer_beam(log.v, payload.model_u, channel, payload.attack_config)
        acc = inference_accuracy(res.traces, payload.truth)
        return float(diff.mean()), float(acc)
    except Exception as exc:  # rewrapped with the cell position by the caller
        return exc


def _unwrap_cell(out, d: int, r: int) -> tuple[float, float]:
    if isinstance(out, Exception):
        raise SweepError(f"budget index {d}, run {r} failed: {out}",
                         delta_index=d, run_index=r) from out
    return out


def _resolve_world(world, model):
    """Split a world argument into (model for attacks/design, fixed traces)."""
    if isinstance(world, FhmmModel):
        return world, None
    if isinstance(world, OccupancySeries):
        raise TypeError("recorded counts carry no per-occupant ground truth; "
                        "pass the location traces instead")
    traces = tuple(world)
    if not traces or not all(isinstance(t, LocationTrace) for t in traces):
        raise TypeError("world must be a model or a sequence of location traces")
    if model is None:
        raise ValueError("a mobility model is required alongside recorded traces")
    return model, traces


def _world_realisation(model, fixed_traces, n_steps, u, seed, r):
    """One run's occupancy series and at-cadence ground truth."""
    if fixed_traces is not None:
        traces = fixed_traces
        series = occupancy_from_traces(traces, model.zone_set)
        steps = series.n_steps if n_steps is None else min(n_steps, series.n_steps)
    else:
        steps = DEFAULT_INTERVALS * u if n_steps is None else n_steps
        traces = sample_traces(model, steps, derive_rng(seed, "trace", r))
        series = occupancy_from_traces(traces, model.zone_set)
    n_iter = steps // u
    if n_iter < 1:
        raise ValueError("world shorter than one control-update interval")
    series = OccupancySeries(series.counts[:n_iter * u])
    truth = tuple(np.asarray(t.steps[:n_iter * u:u], dtype=np.int64)
                  for t in traces)
    return series, truth


def _scheme_kind(spec) -> tuple[str, float | None]:
    if isinstance(spec, str):
        name, _, arg = spec.partition(":")
        return name.strip().lower(), (float(arg) if arg else None)
    kind, param = spec
    return str(kind).strip().lower(), float(param)


def _resolve_scheme(spec, tables, p_y, design_config, M, mpc_config):
    """Normalise a scheme spec to (name, reporter, exact MI, attack channel)."""
    kind, param = _scheme_kind(spec)
    if kind == "identity":
        ch = identity_scheme(M)
        return "identity", ch, mutual_information(p_y, ch.rows), ch
    if kind == "uniform":
        ch = uniform_scheme(M)
        return "uniform", ch, mutual_information(p_y, ch.rows), ch
    if kind == "multinomial":
        if param is None:
            raise ValueError("multinomial scheme needs a diagonal accuracy")
        ch = multinomial_scheme(param, M)
        return f"multinomial({param:g})", ch, mutual_information(p_y, ch.rows), ch
    if kind == "optimal":
        if param is None:
            raise ValueError("optimal scheme needs a cost budget")
        if tables is None:
            raise ValueError("optimal scheme needs constraint tables")
        res = design_distortion(tables, p_y, design_config, delta=param)
        if not res.feasible:
            raise ValueError(f"budget {param:g} is infeasible "
                             f"(row {res.infeasible_row})")
        return f"optimal({param:g})", res.channel, res.mi_bits, res.channel
    if kind in ("fixed-schedule", "schedule", "fixed_schedule"):
        reporter = ScheduleReporter(M, mpc_config.dt)
        # schedule reports ignore the counts entirely: exact MI is zero and
        # the attacker gains nothing, which an all-uniform channel encodes
        return "fixed-schedule", reporter, 0.0, uniform_scheme(M)
    raise ValueError(f"unknown scheme {spec!r}")


def _pareto_flags(points) -> list[bool]:
    """Undominated in (MI, cost), both minimised; ties do not dominate."""
    flags = []
    for i, (mi_i, c_i) in enumerate(points):
        dominated = any((mi_j <= mi_i and c_j <= c_i) and
                        (mi_j < mi_i or c_j < c_i)
                        for j, (mi_j, c_j) in enumerate(points) if j != i)
        flags.append(not dominated)
    return flags


def _spread(values: np.ndarray) -> float:
    """Sample standard deviation; zero for a single observation."""
    return float(values.std(ddof=1)) if values.size > 1 else 0.0
