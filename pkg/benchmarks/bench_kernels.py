"""Compare the compiled kernel backend against the pure-Python fallback.

Runs the same workloads in two subprocesses (one per backend, selected with
the PRIVHVAC_PURE_PY environment variable) and prints wall times plus a
result-equality check.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _workloads(repeats: int):
    import numpy as np

    from privhvac import kernels
    from privhvac.distortion import DesignConfig, build_constraint_tables
    from privhvac.harness import derive_rng
    from privhvac.occupancy import random_office_model
    from privhvac.thermal import (ComfortBand, MpcConfig, MpcProblem, Tariff,
                                  ZoneThermalParams, closed_loop_simulate,
                                  solve_mpc)

    out = {"backend": kernels.BACKEND, "times": {}, "checks": {}}

    def timed(name, fn, n):
        best = float("inf")
        value = None
        for _ in range(n):
            t0 = time.perf_counter()
            value = fn()
            best = min(best, time.perf_counter() - t0)
        out["times"][name] = best
        return value

    # raw zone dynamics fold over a long horizon
    K = 5000
    rng = np.random.default_rng(0)
    m_dot = rng.uniform(0.0084, 1.5, K)
    T_s = rng.uniform(12.8, 40.0, K)
    occ = rng.integers(0, 5, K).astype(float)
    q_ext = np.zeros(K)
    r_e = np.full(K, 1.5e-4)
    r_h = np.full(K, 5e-6)
    temps = np.empty(K)

    def fold():
        return kernels.zone_fold(25.0, m_dot, T_s, occ, q_ext, r_e, r_h,
                                 60.0, 1000.0, 1.0, 0.1, 0.5, 0.9, 4.0,
                                 12.8, 30.0, 24.0, 26.0, temps)

    e, v = timed(f"zone_fold K={K}", fold, max(repeats, 5))
    out["checks"]["zone_fold"] = [float(e), float(v), float(temps[-1])]

    # one full receding-horizon plan (simplex-heavy)
    problem = MpcProblem()
    config = MpcConfig(horizon_steps=120, update_steps=15, block_steps=15)

    def plan():
        return solve_mpc(26.5, 3.0, problem, config)

    sol = timed("solve_mpc horizon=120", plan, repeats)
    out["checks"]["solve_mpc"] = [float(sol.planned_cost), int(sol.iterations)]

    # short closed loop on a sampled world
    model = random_office_model(4, 3, derive_rng(3, "bench"))
    problem2 = MpcProblem(zone=ZoneThermalParams(c_o=1.0),
                          comfort=ComfortBand(24.0, 24.1),
                          tariff=Tariff(r_e=1.5e-4, r_h=1.5e-4))
    config2 = MpcConfig(horizon_steps=60, update_steps=15, block_steps=15)

    def loop():
        log = closed_loop_simulate(model, None, problem2, config2, n_steps=60,
                                   rng=derive_rng(3, "plant"), T_init=24.05)
        return float(log.realized_cost(config2.comfort_penalty).sum())

    cost = timed("closed_loop 4 intervals x 3 zones", loop, repeats)
    out["checks"]["closed_loop"] = [cost]

    # constraint-table construction (many plans)
    dcfg = DesignConfig(delta_T=4.0, delta_T_prime=1.0, temp_grid_step=0.1)

    def tables():
        t = build_constraint_tables(problem2, config2, dcfg, 4)
        return float(t.cost_diff.sum())

    tsum = timed("build_constraint_tables m_max=4", tables, 1)
    out["checks"]["tables"] = [tsum]
    return out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=3,
                    help="timing repetitions per workload (best is kept)")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        print(json.dumps(_workloads(args.repeats)))
        return 0

    results = {}
    for label, force in (("compiled", "0"), ("pure", "1")):
        env = dict(os.environ, PRIVHVAC_PURE_PY=force)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--repeats", str(args.repeats)],
            capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        results[label] = json.loads(proc.stdout)

    for label in results:
        got = results[label]["backend"]
        want = label
        if got != want:
            print(f"warning: requested the {want} backend but got {got} "
                  "(extension not built?)", file=sys.stderr)

    print(f"{'workload':<38} {'compiled':>10} {'pure':>10} {'speedup':>9}")
    for name in results["compiled"]["times"]:
        tc = results["compiled"]["times"][name]
        tp = results["pure"]["times"][name]
        print(f"{name:<38} {tc:>9.4f}s {tp:>9.4f}s {tp / tc:>8.2f}x")

    mismatches = []
    for key, val in results["compiled"]["checks"].items():
        other = results["pure"]["checks"][key]
        if val != other:
            mismatches.append((key, val, other))
    if mismatches:
        print("\nresult mismatches between backends:")
        for key, a, b in mismatches:
            print(f"  {key}: compiled={a} pure={b}")
        return 1
    print("\nall workload results identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
