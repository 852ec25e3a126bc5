"""Acceptance gate: thirteen end-to-end claims about the package.

Each criterion prints exactly one verdict line through the terminal reporter
(so it survives output capture and shows up in a plain test-run transcript),
then asserts it.  Criterion 1 is expected to fail: the per-zone leakage
decomposition it checks is not an identity on multi-zone worlds, because a
fixed population makes zone counts correlated across zones.
"""

import json
import math
import sys
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from privhvac.adversary import (AttackConfig, map_infer_beam,
                                map_infer_bruteforce)
from privhvac.cli import main as cli_main
from privhvac.distortion import (DesignConfig, build_constraint_tables,
                                 design_distortion, dpi_check, mi_gradient,
                                 multinomial_scheme, mutual_information,
                                 row_minmax_cost)
from privhvac.harness import (auto_bracket_deltas, calibrate_delta_to_mi,
                              compare_schemes, default_count_law, derive_rng,
                              design_sweep, run_tradeoff_sweep)
from privhvac.occupancy import (exact_joint_mi_check, occupancy_from_traces,
                                random_office_model, sample_traces)
from privhvac.thermal import (ComfortBand, MpcConfig, MpcProblem, Tariff,
                              ZoneThermalParams, solve_mpc, stage_cost,
                              step_dynamics)

from oracles import (fd_gradient_nats, grid_search_mi_m1,
                     random_feasible_tables_m1)

SEED = 2026
RUNS = 10
N_STEPS = 240
T_INIT = 24.05

_TIMINGS: dict[str, float] = {}
_REPORTER = None


@pytest.fixture(autouse=True)
def _terminal_reporter(request):
    global _REPORTER
    _REPORTER = request.config.pluginmanager.get_plugin("terminalreporter")
    yield


def _verdict(num: int, ok: bool, detail: str, expected_failure: bool = False):
    tag = "PASS" if ok else ("FAIL (expected)" if expected_failure else "FAIL")
    line = f"[criterion {num:02d}] {tag}: {detail}"
    if _REPORTER is not None:
        _REPORTER.ensure_newline()
        _REPORTER.write_line(line)
    else:
        print(line, file=sys.__stderr__, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# shared synthetic world: 4 occupants, 3 interior zones, narrow comfort band


@pytest.fixture(scope="module")
def world():
    model = random_office_model(4, 3, derive_rng(SEED, "world"))
    problem = MpcProblem(zone=ZoneThermalParams(c_o=1.0),
                         comfort=ComfortBand(24.0, 24.1),
                         tariff=Tariff(r_e=1.5e-4, r_h=1.5e-4))
    mpc_config = MpcConfig(horizon_steps=60, update_steps=15, block_steps=15)
    design_config = DesignConfig(delta_T=4.0, delta_T_prime=1.0,
                                 temp_grid_step=0.1)
    return model, problem, mpc_config, design_config


@pytest.fixture(scope="module")
def tables(world):
    model, problem, mpc_config, design_config = world
    t0 = time.perf_counter()
    tabs = build_constraint_tables(problem, mpc_config, design_config,
                                   model.n_occupants)
    _TIMINGS["tables"] = time.perf_counter() - t0
    return tabs


@pytest.fixture(scope="module")
def count_law(world):
    return default_count_law(world[0])


@pytest.fixture(scope="module")
def deltas(world, tables):
    return auto_bracket_deltas(tables, world[3])


@pytest.fixture(scope="module")
def sweep_designs(world, tables, count_law, deltas):
    return design_sweep(tables, count_law, deltas, world[3])


@pytest.fixture(scope="module")
def sweep_records(world, tables, deltas):
    model, problem, mpc_config, design_config = world
    t0 = time.perf_counter()
    records = run_tradeoff_sweep(
        model, problem, deltas=deltas, runs=RUNS, seed=SEED,
        mpc_config=mpc_config, design_config=design_config, tables=tables,
        n_steps=N_STEPS, T_init=T_INIT)
    _TIMINGS["sweep"] = time.perf_counter() - t0
    return records


# ---------------------------------------------------------------------------
# 1. exact joint leakage vs per-zone decomposition (known not to hold)


@pytest.mark.xfail(
    strict=True,
    reason="a fixed population makes zone counts correlated across zones, so "
           "joint leakage is strictly below the per-zone sum whenever there "
           "is more than one interior zone")
def test_criterion_01_per_zone_leakage_decomposition():
    rng = derive_rng(SEED, "c1")
    t0 = time.perf_counter()
    gaps = []
    for _ in range(100):
        m = int(rng.integers(1, 3))
        n = int(rng.integers(1, 3))
        model = random_office_model(m, n, rng)
        rows = rng.dirichlet(np.ones(m + 1), size=m + 1)
        joint_bits, sum_bits = exact_joint_mi_check(model, rows)
        gaps.append(abs(joint_bits - sum_bits))
    elapsed = time.perf_counter() - t0
    worst = max(gaps)
    over = sum(g > 1e-9 for g in gaps)
    ok = worst <= 1e-9 and elapsed <= 10.0
    _verdict(1, ok,
             f"max |joint - per-zone sum| = {worst:.4f} bits over 100 tiny "
             f"worlds ({over} exceed 1e-9; {elapsed:.1f} s); the "
             f"decomposition is not an identity on multi-zone worlds",
             expected_failure=True)


# ---------------------------------------------------------------------------
# 2. channel designer vs exhaustive grid search (single occupant)


def test_criterion_02_design_matches_grid_search():
    rng = derive_rng(SEED, "mi-oracle")
    config = DesignConfig(delta_T=1.0, fw_tolerance=1e-8, fw_max_iters=20_000)
    t0 = time.perf_counter()
    worst = 0.0
    n = 20
    for _ in range(n):
        tabs, delta_T = random_feasible_tables_m1(rng)
        p_y = rng.dirichlet(np.ones(2) * 2.0)
        floors = [row_minmax_cost(tabs, y, delta_T) for y in (0, 1)]
        delta = max(floors) * rng.uniform(1.1, 2.0)
        res = design_distortion(tabs, p_y, config, delta=delta)
        ref = grid_search_mi_m1(tabs, p_y, delta, delta_T, resolution=1e-3)
        assert res.feasible and ref is not None
        worst = max(worst, abs(res.mi_bits - ref[0]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-2 and elapsed <= 60.0
    _verdict(2, ok,
             f"designed leakage within {worst:.2e} bits of exhaustive "
             f"1e-3-resolution grid search on {n} single-occupant instances "
             f"({elapsed:.1f} s)")


# ---------------------------------------------------------------------------
# 3. analytic leakage gradient vs central finite differences


def test_criterion_03_gradient_matches_finite_differences():
    rng = derive_rng(SEED, "grad")
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 5))
        n = m + 1
        p_y = rng.dirichlet(np.ones(n) * 2.0)
        rows = rng.dirichlet(np.ones(n), size=n)
        rows = 0.9 * rows + 0.1 / n  # keep entries interior for the FD probe
        g = mi_gradient(p_y, rows)
        fd = fd_gradient_nats(p_y, rows)
        rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-9)
        worst = max(worst, rel)
    ok = worst <= 1e-4
    _verdict(3, ok,
             f"gradient matches central finite differences to relative "
             f"{worst:.2e} on 50 random channels (up to 4 occupants)")


# ---------------------------------------------------------------------------
# 4. trapezoidal dynamics vs the analytic linear-ODE solution


def test_criterion_04_dynamics_convergence_order():
    zone = ZoneThermalParams(C=100.0)
    rng = derive_rng(SEED, "order")
    t_final = 60.0
    dts = (60.0, 30.0, 15.0, 7.5)
    orders = []
    for _ in range(5):
        T0 = float(rng.uniform(20.0, 28.0))
        T_s = float(rng.uniform(12.0, 40.0))
        m_dot = float(rng.uniform(0.5, 2.0))
        occ = float(rng.integers(0, 5))
        q_ext = float(rng.uniform(0.0, 0.5))
        h = m_dot * zone.c_p
        T_eq = T_s + (q_ext + zone.c_o * occ) / h
        exact = T_eq + (T0 - T_eq) * math.exp(-h * t_final / zone.C)
        errors = []
        for dt in dts:
            T = T0
            for _ in range(int(round(t_final / dt))):
                T = step_dynamics(T, m_dot, T_s, occ, zone, dt, q_ext)
            errors.append(abs(T - exact))
        slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
        orders.append(slope)
    ok = min(orders) >= 1.9
    _verdict(4, ok,
             f"empirical convergence order >= {min(orders):.3f} against the "
             f"analytic solution across dt = 60/30/15/7.5 s (5 instances)")


# ---------------------------------------------------------------------------
# 5. planner vs exhaustive blocked-control grid on a short horizon


def test_criterion_05_mpc_close_to_exhaustive_grid():
    problem = MpcProblem(zone=ZoneThermalParams(c_o=1.0))
    config = MpcConfig(horizon_steps=16, update_steps=16, block_steps=8)
    zone, hvac, band = problem.zone, problem.hvac, problem.comfort
    md_grid = np.linspace(hvac.m_min, hvac.m_max, 20)
    ts_grid = np.linspace(hvac.T_a, hvac.T_h_max, 20)
    MD1, TS1, MD2, TS2 = (a.ravel() for a in np.meshgrid(
        md_grid, ts_grid, md_grid, ts_grid, indexing="ij"))
    per_step = np.array(
        [stage_cost(m, t, hvac, problem.tariff.r_e, problem.tariff.r_h,
                    config.dt) for m, t in zip(MD1, TS1)])
    cost1 = per_step * config.block_steps
    cost2 = np.array(
        [stage_cost(m, t, hvac, problem.tariff.r_e, problem.tariff.r_h,
                    config.dt) for m, t in zip(MD2, TS2)]) * config.block_steps

    rng = derive_rng(SEED, "mpc-grid")
    worst_rel = -np.inf
    for _ in range(10):
        T0 = float(rng.uniform(22.0, 27.0))
        occ = float(rng.integers(0, 5))
        temp = np.full(MD1.shape, T0)
        violation = np.zeros_like(temp)
        for k in range(config.horizon_steps):
            md, ts = (MD1, TS1) if k < config.block_steps else (MD2, TS2)
            h = md * zone.c_p
            temp = temp + (zone.c_o * occ + h * (ts - temp)) / (
                zone.C / config.dt + 0.5 * h)
            violation += (np.maximum(temp - band.T_high, 0.0)
                          + np.maximum(band.T_low - temp, 0.0))
        grid_best = float(
            (cost1 + cost2 + config.comfort_penalty * violation).min())
        sol = solve_mpc(T0, occ, problem, config)
        rel = (sol.planned_cost - grid_best) / max(grid_best, 1e-9)
        worst_rel = max(worst_rel, rel)
    ok = worst_rel <= 0.01
    _verdict(5, ok,
             f"planned cost at most {max(worst_rel, 0.0):.2%} above the "
             f"160000-candidate blocked grid optimum on 10 instances "
             f"(negative gaps mean the planner beat the grid; worst "
             f"{worst_rel:+.2%})")


# ---------------------------------------------------------------------------
# 6. realized cost differences stay inside every budget


def test_criterion_06_cost_bound_holds_across_sweep(sweep_records):
    elapsed = _TIMINGS["tables"] + _TIMINGS["sweep"]
    feasible = [r for r in sweep_records if r.feasible]
    margins = []
    for r in feasible:
        allowance = r.delta + 2.0 * r.realized_cost_diff_std / math.sqrt(r.runs)
        margins.append(allowance - r.realized_cost_diff_mean)
    ok = (len(feasible) >= 1 and all(m >= -1e-9 for m in margins)
          and elapsed <= 600.0)
    _verdict(6, ok,
             f"mean cost difference <= budget + 2*std/sqrt(runs) at all "
             f"{len(feasible)} feasible budgets of the 8-point sweep "
             f"(tightest margin {min(margins):.3f}; {elapsed:.0f} s)")


# ---------------------------------------------------------------------------
# 7. leakage is non-increasing along the ascending budget sweep


def test_criterion_07_leakage_monotone_in_budget(sweep_records):
    mis = [r.mi_bits for r in sweep_records if r.feasible]
    ok = all(b <= a for a, b in zip(mis, mis[1:]))
    _verdict(7, ok,
             f"designed leakage non-increasing (no tolerance) across the "
             f"sweep: {', '.join(f'{m:.3f}' for m in mis)} bits")


# ---------------------------------------------------------------------------
# 8. attack accuracy tracks leakage


def test_criterion_08_accuracy_correlates_with_leakage(sweep_records):
    feasible = [r for r in sweep_records if r.feasible]
    rho = spearmanr([r.mi_bits for r in feasible],
                    [r.accuracy_mean for r in feasible]).statistic
    ok = rho >= 0.8
    _verdict(8, ok,
             f"Spearman correlation between leakage and attack accuracy "
             f"= {rho:.3f} across {len(feasible)} budgets")


# ---------------------------------------------------------------------------
# 9. channel structure at the sweep extremes


def test_criterion_09_channel_structure_at_extremes(sweep_designs):
    feasible = [d for d in sweep_designs if d.feasible]
    tight = feasible[0].channel.rows
    loose = feasible[-1]
    diag = float(np.mean(np.diag(tight)))
    spread = max(
        float(np.abs(loose.channel.rows[i] - loose.channel.rows[j]).sum())
        for i in range(loose.channel.rows.shape[0])
        for j in range(i + 1, loose.channel.rows.shape[0]))
    ok = diag >= 0.9 and loose.mi_bits <= 0.01 and spread <= 0.05
    _verdict(9, ok,
             f"tightest budget keeps mean diagonal mass {diag:.3f} (>= 0.9); "
             f"loosest leaks {loose.mi_bits:.4f} bits with max pairwise row "
             f"L1 distance {spread:.4f}")


# ---------------------------------------------------------------------------
# 10. designed channels beat canned schemes at matched leakage


def test_criterion_10_designed_channel_pareto_dominates(world, tables,
                                                        count_law, deltas):
    model, problem, mpc_config, design_config = world
    m = model.n_occupants
    alternatives = [("uniform", 0.0)]
    for acc in (0.6, 0.7, 0.8, 0.9):
        target = mutual_information(count_law, multinomial_scheme(acc, m))
        alternatives.append((("multinomial", acc), target))
    failures = []
    checked = []
    for alt, target in alternatives:
        delta_cal, _ = calibrate_delta_to_mi(
            tables, count_law, target, design_config,
            low=float(deltas[0]), high=float(deltas[-1]), tol_bits=0.05)
        comps = compare_schemes(
            model, problem, [("optimal", delta_cal), alt], runs=RUNS,
            seed=SEED, mpc_config=mpc_config, design_config=design_config,
            tables=tables, p_y=count_law, n_steps=N_STEPS, T_init=T_INIT)
        opt = next(c for c in comps if c.scheme.startswith("optimal"))
        oth = next(c for c in comps if not c.scheme.startswith("optimal"))
        se = oth.cost_std / math.sqrt(RUNS)
        matched = abs(opt.mi_bits - oth.mi_bits) <= 0.05 + 1e-9
        cheaper = opt.mean_cost <= oth.mean_cost + se
        checked.append(f"{oth.scheme}: {opt.mean_cost:.0f} vs "
                       f"{oth.mean_cost:.0f} (+/-{se:.0f})")
        if not (matched and cheaper):
            failures.append(oth.scheme)
    ok = not failures
    _verdict(10, ok,
             f"designed channel at matched leakage costs no more than every "
             f"alternative within one Monte-Carlo standard error -- "
             f"{'; '.join(checked)}"
             + (f" -- FAILED for {failures}" if failures else ""))


# ---------------------------------------------------------------------------
# 11. beam search equals brute force on tiny instances


def test_criterion_11_beam_matches_bruteforce():
    rng = derive_rng(SEED, "beam")
    mismatches = 0
    non_monotone = 0
    for _ in range(100):
        m = int(rng.integers(1, 3))
        n = int(rng.integers(1, 3))
        k = int(rng.integers(2, 5))
        model = random_office_model(m, n, rng)
        traces = sample_traces(model, k, rng)
        counts = occupancy_from_traces(traces, model.zone_set).counts
        channel = (multinomial_scheme(0.8, m).rows if m >= 2
                   else np.array([[0.8, 0.2], [0.2, 0.8]]))
        cum = np.cumsum(channel, axis=1)
        reported = np.minimum(np.array(
            [[int(np.searchsorted(cum[y], rng.random(), side="right"))
              for y in row] for row in counts]), m)
        full = (n + 1) ** m
        brute = map_infer_bruteforce(reported, model, channel)
        scores = []
        for width in sorted({1, 2, max(1, full // 2), full}):
            res = map_infer_beam(reported, model, channel,
                                 AttackConfig(beam_width=width))
            scores.append(res.log_posterior)
        beam = res  # full width: exact search
        if not (abs(beam.log_posterior - brute.log_posterior) <= 1e-9
                and all(np.array_equal(a.steps, b.steps)
                        for a, b in zip(beam.traces, brute.traces))):
            mismatches += 1
        if any(b < a - 1e-12 for a, b in zip(scores, scores[1:])):
            non_monotone += 1
    ok = mismatches == 0 and non_monotone == 0
    _verdict(11, ok,
             f"full-width beam equals brute force on 100 tiny instances "
             f"({mismatches} posterior/trace mismatches) and the beam score "
             f"is monotone in width on all of them ({non_monotone} "
             f"violations)")


# ---------------------------------------------------------------------------
# 12. composed reporting chains never gain information


def test_criterion_12_data_processing_inequality():
    rng = derive_rng(SEED, "dpi")
    worst = -np.inf
    for _ in range(100):
        n = int(rng.integers(1, 5)) + 1
        p_y = rng.dirichlet(np.ones(n))
        sensor = rng.dirichlet(np.ones(n), size=n)
        design = rng.dirichlet(np.ones(n), size=n)
        i_yv, i_wv = dpi_check(p_y, sensor, design)
        worst = max(worst, i_yv - i_wv)
    ok = worst <= 1e-12
    _verdict(12, ok,
             f"end-to-end leakage never exceeds intermediate leakage on 100 "
             f"composed chains (max violation {worst:.2e} bits)")


# ---------------------------------------------------------------------------
# 13. repeated runs are byte-identical


def test_criterion_13_reruns_byte_identical(tmp_path):
    cfg = {
        "world": {"kind": "synthetic", "occupants": 2, "zones": 1},
        "thermal": {"c_o": 1.0, "r_h": 1.5e-4, "T_low": 24.0, "T_high": 24.1},
        "mpc": {"horizon_steps": 16, "update_steps": 4, "block_steps": 4},
        "design": {"delta_T": 4.0, "delta_T_prime": 1.0,
                   "temp_grid_step": 0.1},
        "sweep": {"points": 3, "runs": 2, "n_steps": 16, "T_init": 24.05,
                  "schemes": ["identity", "uniform"]},
        "seed": 11,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    commands = [["tradeoff"], ["compare"], ["design", "--delta", "1000"],
                ["simulate"]]
    differing = []
    for cmd in commands:
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{cmd[0]}-{run}"
            rc = cli_main(["--config", str(cfg_path),
                           "--output-dir", str(out)] + cmd)
            assert rc == 0
            outs.append({p.name: p.read_bytes() for p in out.iterdir()})
        if outs[0] != outs[1]:
            differing.append(cmd[0])
    ok = not differing
    _verdict(13, ok,
             f"tradeoff/compare/design/simulate reruns with identical config "
             f"and seed produced byte-identical outputs"
             + (f" -- differences in {differing}" if differing else ""))
